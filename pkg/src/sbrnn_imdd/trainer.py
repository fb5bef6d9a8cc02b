"""End-to-end training of the BRNN transceiver.

Each optimization step encodes V consecutive messages of each of Z independent
sequences, interleaves the Z x V blocks sequence-major into one channel stream,
splits the received stream back into blocks, decodes, and takes one Adam step on
the mini-batch cross entropy. Recurrent states are carried from step to step
(detached) and reset to zero every ``reinit_period`` steps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .autoencoder import (AutoencoderDims, TransceiverParams, init_params, one_hot, rx_logits,
                          softmax, tx_encode)
from .errors import ConfigurationError, TrainingDivergence
from .estimator import bler, slide
from .rng import generate_messages

log = logging.getLogger(__name__)

LOG_FLOOR = 1e-30


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    Z: int = 250
    T_train: int = 10**6
    V: int = 10
    reinit_period: int = 100
    max_iters: int = 100_000
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed_train: int = 1
    seed_test: int = 2
    seed_init: int = 0
    validation_every: int = 1000
    validation_messages: int = 2000
    validation_window: int = 10
    zero_softmax_init: bool = False

    def __post_init__(self):
        for name in ("Z", "T_train", "V", "reinit_period"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.max_iters < 0:
            raise ConfigurationError("max_iters must be >= 0")
        if self.V * self.max_iters > self.T_train:
            raise ConfigurationError(
                f"V * max_iters = {self.V * self.max_iters} exceeds T_train = {self.T_train}")


@dataclass
class AdamState:
    t: int
    m: list
    v: list

    @classmethod
    def zeros_like(cls, tensors) -> "AdamState":
        return cls(0, [torch.zeros_like(p) for p in tensors], [torch.zeros_like(p) for p in tensors])


def adam_update(tensors, grads, state: AdamState, cfg: AdamConfig) -> AdamState:
    """One bias-corrected Adam step, in place on ``tensors`` and ``state``."""
    state.t += 1
    c1 = 1.0 - cfg.beta1**state.t
    c2 = 1.0 - cfg.beta2**state.t
    with torch.no_grad():
        for p, g, m, v in zip(tensors, grads, state.m, state.v):
            m.mul_(cfg.beta1).add_(g, alpha=1.0 - cfg.beta1)
            v.mul_(cfg.beta2).addcmul_(g, g, value=1.0 - cfg.beta2)
            p.sub_(cfg.lr * (m / c1) / (torch.sqrt(v / c2) + cfg.eps))
    return state


def cross_entropy(target, p):
    """-sum_i target_i log p_i along the last axis, with p floored at 1e-30."""
    return -(target * torch.log(torch.clamp(p, min=LOG_FLOOR))).sum(dim=-1)


@dataclass
class CarriedStates:
    """Directional BRNN states carried across mini-batches, one row per sequence."""

    tx_fwd: torch.Tensor | None = None
    tx_bwd: torch.Tensor | None = None
    rx_fwd: torch.Tensor | None = None
    rx_bwd: torch.Tensor | None = None


def batch_loss(params: TransceiverParams, messages, channel, rng, carried: CarriedStates | None = None):
    """Mini-batch loss for messages [Z, V]; returns (loss, new carried states)."""
    carried = carried or CarriedStates()
    M, n = params.dims.M, params.dims.n
    onehots = one_hot(messages, M)
    Z, V = onehots.shape[:2]
    blocks, (tf, tb) = tx_encode(onehots, params.tx, carried.tx_fwd, carried.tx_bwd, return_states=True)
    stream = blocks.reshape(Z * V * n)
    received = channel(stream, rng) * channel.rx_scale
    rx_blocks = received.reshape(Z, V, n)
    logits, (rf, rb) = rx_logits(rx_blocks, params.rx, carried.rx_fwd, carried.rx_bwd, return_states=True)
    loss = cross_entropy(onehots, softmax(logits)).mean()
    new = CarriedStates(tf.detach(), tb.detach(), rf.detach(), rb.detach())
    return loss, new


def train_step(params: TransceiverParams, messages, channel, opt_state: AdamState, rng,
               carried: CarriedStates | None = None, adam: AdamConfig = AdamConfig()):
    """Forward, backward and one Adam update. Returns (params, opt_state, loss, carried)."""
    tensors = params.tensors()
    for t in tensors:
        t.requires_grad_(True)
        t.grad = None
    loss, new_carried = batch_loss(params, messages, channel, rng, carried)
    grads = torch.autograd.grad(loss, tensors)
    value = float(loss.detach())
    bad = [name for name, g in zip(params.named(), grads) if not torch.isfinite(g).all()]
    if not math.isfinite(value) or bad:
        raise TrainingDivergence(f"non-finite loss/gradient (loss={value})",
                                 {"loss": value, "nonfinite_grads": bad, "step": opt_state.t})
    for t in tensors:
        t.requires_grad_(False)
    adam_update(tensors, grads, opt_state, adam)
    return params, opt_state, value, new_carried


def transmit(params: TransceiverParams, messages, channel, rng, chunk: int = 16) -> torch.Tensor:
    """Encode each row of ``messages`` [S, L] from zero states, send it through its own
    channel realization, and return received blocks [S, L, n] (receiver gain applied)."""
    messages = np.atleast_2d(messages)
    S, L = messages.shape
    n = params.dims.n
    out = []
    with torch.no_grad():
        for s in range(0, S, chunk):
            blocks = tx_encode(one_hot(messages[s:s + chunk], params.dims.M), params.tx)
            rows = blocks.shape[0]
            rx = channel(blocks.reshape(rows, L * n), rng) * channel.rx_scale
            out.append(rx.reshape(rows, L, n))
    return torch.cat(out, dim=0)


def validation_bler(params: TransceiverParams, channel, messages, window: int, rng) -> float:
    rx = transmit(params, messages[None, :], channel, rng)[0]
    finals = slide(params.rx, rx, window)
    return bler(messages[:finals.shape[0]], finals)


@dataclass
class LossTrace:
    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    val_bler: list = field(default_factory=list)
    best_params: TransceiverParams | None = None
    best_val_bler: float = math.inf

    def rows(self):
        return list(zip(self.steps, self.losses, self.val_bler))


class MessageSource:
    """Draws the per-step [Z, V] slices of the Z training sequences from one Mersenne-twister stream."""

    def __init__(self, cfg: TrainConfig, M: int):
        self.gen = np.random.Generator(np.random.MT19937(cfg.seed_train))
        self.cfg, self.M = cfg, M

    def next_batch(self) -> np.ndarray:
        return self.gen.integers(0, self.M, size=(self.cfg.Z, self.cfg.V))


def train(cfg: TrainConfig, channel, dims: AutoencoderDims, params: TransceiverParams | None = None,
          on_checkpoint=None, checkpoint_every: int = 0):
    """Run up to ``cfg.max_iters`` steps. Returns (final params, LossTrace).

    ``on_checkpoint(step, params)`` is called every ``checkpoint_every`` steps when set.
    The trace keeps a copy of the parameters with the best validation BLER.
    """
    params = params or init_params(dims, cfg.seed_init, zero_softmax=cfg.zero_softmax_init)
    params = params.detached()
    trace = LossTrace()
    if cfg.max_iters == 0:
        return params, trace
    seeds = np.random.SeedSequence(cfg.seed_train).spawn(2)
    noise_rng = np.random.default_rng(seeds[0])
    val_rng_seed = seeds[1]
    source = MessageSource(cfg, dims.M)
    val_msgs = None
    if cfg.validation_every:
        # held-out slice, drawn with the test-family generator under its own seed
        val_msgs = generate_messages(cfg.validation_messages + cfg.validation_window - 1, dims.M,
                                     "tausworthe", [cfg.seed_test, 0xFA11])
    opt = AdamState.zeros_like(params.tensors())
    carried = CarriedStates()
    for step in range(1, cfg.max_iters + 1):
        if (step - 1) % cfg.reinit_period == 0:
            carried = CarriedStates()
        params, opt, loss, carried = train_step(params, source.next_batch(), channel, opt, noise_rng,
                                                carried, cfg.adam)
        vb = math.nan
        if val_msgs is not None and (step % cfg.validation_every == 0 or step == cfg.max_iters):
            vb = validation_bler(params, channel, val_msgs, cfg.validation_window,
                                 np.random.default_rng(val_rng_seed))
            if vb < trace.best_val_bler:
                trace.best_val_bler, trace.best_params = vb, params.detached()
            log.info("step %d loss %.5f val BLER %.4g", step, loss, vb)
        trace.steps.append(step)
        trace.losses.append(loss)
        trace.val_bler.append(vb)
        if on_checkpoint is not None and checkpoint_every and step % checkpoint_every == 0:
            on_checkpoint(step, params)
    return params, trace
