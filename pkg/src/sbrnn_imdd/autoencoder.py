"""Bidirectional RNN transmitter and receiver.

Both ends use the concatenation cell ``h_t = act(W [x_t; h_{t-1}] + b)`` run once
left-to-right and once right-to-left with separate parameters. The transmitter
averages the two directions under a clipping activation that keeps every sample in
the MZM drive range; the receiver concatenates them (ReLU) and feeds a softmax layer.

Arrays are ``torch`` tensors with the sequence on axis -2 and features on axis -1;
any leading axes are batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
import torch

from .errors import ConfigurationError

CLIP_MAX = math.pi / 4


@dataclass(frozen=True)
class AutoencoderDims:
    M: int = 64
    n: int = 48

    def __post_init__(self):
        if self.M < 2 or self.M & (self.M - 1):
            raise ConfigurationError(f"M must be a power of two >= 2, got {self.M}")
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")

    @property
    def bits(self) -> int:
        return int(self.M).bit_length() - 1


class _ParamSet:
    """Shared helpers for the parameter dataclasses below."""

    def named(self) -> dict[str, torch.Tensor]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def tensors(self) -> list[torch.Tensor]:
        return list(self.named().values())

    def requires_grad_(self, flag: bool = True):
        for t in self.tensors():
            t.requires_grad_(flag)
        return self

    def detached(self):
        return type(self)(**{k: v.detach().clone() for k, v in self.named().items()})

    def to(self, dtype):
        return type(self)(**{k: v.to(dtype) for k, v in self.named().items()})


@dataclass
class TxParams(_ParamSet):
    W_fwd: torch.Tensor  # [n, M + n]
    b_fwd: torch.Tensor  # [n]
    W_bwd: torch.Tensor
    b_bwd: torch.Tensor

    def check(self, dims: AutoencoderDims):
        _check_shapes(self, {"W_fwd": (dims.n, dims.M + dims.n), "b_fwd": (dims.n,),
                             "W_bwd": (dims.n, dims.M + dims.n), "b_bwd": (dims.n,)})


@dataclass
class RxParams(_ParamSet):
    W_fwd: torch.Tensor  # [2M, n + 2M]
    b_fwd: torch.Tensor  # [2M]
    W_bwd: torch.Tensor
    b_bwd: torch.Tensor
    W_softmax: torch.Tensor  # [M, 4M]
    b_softmax: torch.Tensor  # [M]

    def check(self, dims: AutoencoderDims):
        M, n = dims.M, dims.n
        _check_shapes(self, {"W_fwd": (2 * M, n + 2 * M), "b_fwd": (2 * M,),
                             "W_bwd": (2 * M, n + 2 * M), "b_bwd": (2 * M,),
                             "W_softmax": (M, 4 * M), "b_softmax": (M,)})


@dataclass
class TransceiverParams:
    dims: AutoencoderDims
    tx: TxParams
    rx: RxParams

    def named(self) -> dict[str, torch.Tensor]:
        out = {f"tx.{k}": v for k, v in self.tx.named().items()}
        out.update({f"rx.{k}": v for k, v in self.rx.named().items()})
        return out

    def tensors(self) -> list[torch.Tensor]:
        return self.tx.tensors() + self.rx.tensors()

    def requires_grad_(self, flag: bool = True):
        self.tx.requires_grad_(flag)
        self.rx.requires_grad_(flag)
        return self

    def detached(self) -> "TransceiverParams":
        return TransceiverParams(self.dims, self.tx.detached(), self.rx.detached())

    @classmethod
    def from_named(cls, dims: AutoencoderDims, arrays: dict) -> "TransceiverParams":
        def grab(prefix):
            return {k[len(prefix):]: torch.as_tensor(np.asarray(v), dtype=torch.float64)
                    for k, v in arrays.items() if k.startswith(prefix)}
        p = cls(dims, TxParams(**grab("tx.")), RxParams(**grab("rx.")))
        p.tx.check(dims)
        p.rx.check(dims)
        return p


def _check_shapes(params, expected):
    for name, shape in expected.items():
        got = tuple(getattr(params, name).shape)
        if got != shape:
            raise ConfigurationError(f"{type(params).__name__}.{name} has shape {got}, expected {shape}")
        if not torch.isfinite(getattr(params, name)).all():
            raise ConfigurationError(f"{type(params).__name__}.{name} has non-finite entries")


def _glorot(rng, fan_out, fan_in):
    scale = math.sqrt(6.0 / (fan_in + fan_out))
    return torch.as_tensor(rng.uniform(-scale, scale, size=(fan_out, fan_in)), dtype=torch.float64)


def init_params(dims: AutoencoderDims, seed: int = 0, zero_softmax: bool = False) -> TransceiverParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    M, n = dims.M, dims.n
    zeros = lambda k: torch.zeros(k, dtype=torch.float64)  # noqa: E731
    tx = TxParams(_glorot(rng, n, M + n), zeros(n), _glorot(rng, n, M + n), zeros(n))
    w_soft = torch.zeros(M, 4 * M, dtype=torch.float64) if zero_softmax else _glorot(rng, M, 4 * M)
    rx = RxParams(_glorot(rng, 2 * M, n + 2 * M), zeros(2 * M), _glorot(rng, 2 * M, n + 2 * M),
                  zeros(2 * M), w_soft, zeros(M))
    return TransceiverParams(dims, tx, rx)


def relu(x):
    return torch.relu(x)


def clipping_activation(x):
    """ReLU(x) - ReLU(x - pi/4): identity on [0, pi/4], saturating outside.

    Evaluated as a clamp so the upper bound is exact in floating point.
    """
    return torch.clamp(x, 0.0, CLIP_MAX)


def softmax(x, dim: int = -1):
    z = x - x.max(dim=dim, keepdim=True).values
    e = torch.exp(z)
    return e / e.sum(dim=dim, keepdim=True)


def _cell(x_t, h_prev, W, b, activation):
    return activation(torch.cat([x_t, h_prev], dim=-1) @ W.T + b)


def brnn_pass(inputs, W_fwd, b_fwd, W_bwd, b_bwd, activation, init_fwd=None, init_bwd=None):
    """Run the forward and backward recurrences over axis -2 of ``inputs``.

    Returns ``(fwd, bwd)`` state sequences of shape ``inputs.shape[:-1] + (hidden,)``.
    ``bwd[..., t, :]`` is the backward state at position t (computed from t..T-1).
    """
    hidden = W_fwd.shape[0]
    d_in = inputs.shape[-1]
    for name, W in (("W_fwd", W_fwd), ("W_bwd", W_bwd)):
        if W.shape != (hidden, d_in + hidden):
            raise ConfigurationError(f"{name} shape {tuple(W.shape)} does not match input dim {d_in} "
                                     f"and hidden dim {hidden}")
    batch = inputs.shape[:-2]
    T = inputs.shape[-2]
    zero = inputs.new_zeros(batch + (hidden,))
    h = zero if init_fwd is None else init_fwd
    g = zero if init_bwd is None else init_bwd
    if h.shape[-1] != hidden or g.shape[-1] != hidden:
        raise ConfigurationError("initial state dimension does not match the cell output")
    fwd, bwd = [], [None] * T
    for t in range(T):
        h = _cell(inputs[..., t, :], h, W_fwd, b_fwd, activation)
        fwd.append(h)
    for t in reversed(range(T)):
        g = _cell(inputs[..., t, :], g, W_bwd, b_bwd, activation)
        bwd[t] = g
    if T == 0:
        empty = inputs.new_zeros(batch + (0, hidden))
        return empty, empty
    return torch.stack(fwd, dim=-2), torch.stack(bwd, dim=-2)


def one_hot(messages, M: int, dtype=torch.float64) -> torch.Tensor:
    """Zero-based message indices -> one-hot vectors along a new last axis."""
    idx = torch.as_tensor(np.asarray(messages), dtype=torch.long)
    return torch.nn.functional.one_hot(idx, M).to(dtype)


def tx_encode(onehots, p: TxParams, init_fwd=None, init_bwd=None, return_states: bool = False):
    """Encode one-hot messages [..., T, M] into transmit blocks [..., T, n] in [0, pi/4].

    With ``return_states`` also returns the last forward state and the last computed
    backward state, for carrying into the next mini-batch.
    """
    fwd, bwd = brnn_pass(onehots, p.W_fwd, p.b_fwd, p.W_bwd, p.b_bwd, clipping_activation,
                         init_fwd, init_bwd)
    blocks = 0.5 * (fwd + bwd)
    if return_states:
        return blocks, (fwd[..., -1, :], bwd[..., 0, :])
    return blocks


def rx_states(blocks, p: RxParams, init_fwd=None, init_bwd=None):
    fwd, bwd = brnn_pass(blocks, p.W_fwd, p.b_fwd, p.W_bwd, p.b_bwd, relu, init_fwd, init_bwd)
    return torch.cat([fwd, bwd], dim=-1), (fwd[..., -1, :], bwd[..., 0, :])


def rx_logits(blocks, p: RxParams, init_fwd=None, init_bwd=None, return_states: bool = False):
    h, states = rx_states(blocks, p, init_fwd, init_bwd)
    logits = h @ p.W_softmax.T + p.b_softmax
    return (logits, states) if return_states else logits


def rx_decode(window, p: RxParams, init_fwd=None, init_bwd=None):
    """Received blocks [..., W, n] -> probability vectors [..., W, M]."""
    return softmax(rx_logits(window, p, init_fwd, init_bwd))
