"""Experiment orchestration: per-distance training/evaluation of the SBRNN and the MLSD baselines.

Every random stream is derived from ``(cfg.seed, purpose, distance)`` so distances can
run in any order (or in separate processes) and still produce the same rows.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch

from .autoencoder import TransceiverParams
from .channel import IMDDChannel
from .complexity import flops_mlsd, flops_sbrnn_rx, flops_sbrnn_tx
from .config import ExperimentConfig, derive_seed, dump_config
from .errors import ConfigurationError
from .estimator import (average_cross_entropy, decisions, optimize_weights, true_message_probabilities,
                        uniform_weights, window_probabilities)
from .labeling import BitLabeling, estimate_confusion, tabu_search
from .mlsd import estimate_nu, mlsd_ber
from .persistence import (ResultRow, load_checkpoint, load_nu_table, save_checkpoint, save_labeling,
                          save_nu_table, write_csv, write_svg, write_trace_csv)
from .rng import generate_messages
from .trainer import train, transmit

log = logging.getLogger(__name__)

# purpose tags for derive_seed
_TAG_TRAIN, _TAG_REPR, _TAG_TEST, _TAG_TABU, _TAG_RANDOM_LAB, _TAG_MLSD = range(1, 7)


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def training_hash(cfg: ExperimentConfig) -> str:
    """Digest of the settings a trained checkpoint depends on."""
    return _digest(repr((cfg.seed, cfg.dims, cfg.channel, cfg.train)))


def checkpoint_path(cfg: ExperimentConfig, distance: float) -> Path:
    return (Path(cfg.checkpoint_dir)
            / f"sbrnn_M{cfg.dims.M}_n{cfg.dims.n}_{distance:g}km_{training_hash(cfg)}.ckpt")


def nu_table_path(cfg: ExperimentConfig, distance: float) -> Path:
    key = _digest(repr((cfg.seed, cfg.system, cfg.system_channel(), cfg.mlsd)))
    return Path(cfg.checkpoint_dir) / f"nu_{cfg.system}_mu{cfg.mu}_{distance:g}km_{key}.nut"


def output_stem(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir) / f"{cfg.system}_{cfg.hash()}"


def distance_train_config(cfg: ExperimentConfig, distance: float):
    return replace(cfg.train, seed_train=derive_seed(cfg.train.seed_train, _TAG_TRAIN, float(distance)),
                   seed_init=derive_seed(cfg.train.seed_init, float(distance)))


def train_model(cfg: ExperimentConfig, distance: float, trace_path=None) -> TransceiverParams:
    """Train at one distance; keeps the parameters with the best validation BLER when tracked."""
    channel = IMDDChannel(cfg.channel.at_distance(distance))
    params, trace = train(distance_train_config(cfg, distance), channel, cfg.dims)
    if trace_path is not None:
        write_trace_csv(trace_path, trace)
    if trace.best_params is not None:
        final_bler = trace.val_bler[-1] if trace.val_bler else math.nan
        if trace.best_val_bler < final_bler:
            params = trace.best_params
    return params


def obtain_model(cfg: ExperimentConfig, distance: float) -> TransceiverParams:
    path = checkpoint_path(cfg, distance)
    if path.exists():
        params = load_checkpoint(path)
        if params.dims != cfg.dims:
            raise ConfigurationError(f"{path} holds dims {params.dims}, config asks for {cfg.dims}")
        return params
    if not cfg.train_missing:
        raise ConfigurationError(f"no checkpoint at {path}; pass --train to train missing models")
    path.parent.mkdir(parents=True, exist_ok=True)
    params = train_model(cfg, distance, trace_path=path.with_suffix(".trace.csv"))
    save_checkpoint(path, params)
    return params


def _inference_params(params: TransceiverParams, cfg: ExperimentConfig) -> TransceiverParams:
    dtype = {"float64": torch.float64, "float32": torch.float32}.get(cfg.estimator.inference_dtype)
    if dtype is None:
        raise ConfigurationError(f"inference_dtype must be float32 or float64, got {cfg.estimator.inference_dtype!r}")
    return TransceiverParams(params.dims, params.tx, params.rx.to(dtype))


@dataclass
class WeightFit:
    window: int
    weights: np.ndarray
    xent_uniform: float
    xent_optimized: float
    confusion: object  # ConfusionMatrix under the optimized weights


def representative_fit(params: TransceiverParams, cfg: ExperimentConfig, distance: float) -> list[WeightFit]:
    """Optimize combining weights per window size on one representative Tausworthe sequence."""
    channel = IMDDChannel(cfg.channel.at_distance(distance))
    Wmax = max(cfg.estimator.windows)
    L = cfg.estimator.representative_length + 2 * (Wmax - 1)
    msgs = generate_messages(L, cfg.dims.M, "tausworthe", [cfg.seed, _TAG_REPR, int(distance * 1000)])
    rng = np.random.default_rng(derive_seed(cfg.seed, _TAG_REPR, float(distance)))
    rx = transmit(params, msgs[None, :], channel, rng)[0]
    fits = []
    for W in cfg.estimator.windows:
        tensor = window_probabilities(params.rx, rx, W)
        labels = msgs[W - 1:tensor.T]
        R = true_message_probabilities(tensor, labels)
        a = optimize_weights(tensor, labels)
        confusion = estimate_confusion(labels, decisions(tensor.finals(a)[W - 1:tensor.T]), cfg.dims.M)
        fits.append(WeightFit(W, a, average_cross_entropy(uniform_weights(W), R),
                              average_cross_entropy(a, R), confusion))
    return fits


@dataclass
class TestOutcome:
    """Decisions on the fully estimated blocks of the test set for one window size and weighting."""

    window: int
    weights_name: str
    weights: np.ndarray
    labels: np.ndarray
    decided: np.ndarray

    @property
    def bler(self) -> float:
        return float(np.mean(self.labels != self.decided))

    def ber(self, labeling: BitLabeling) -> float:
        H = labeling.hamming()
        return float(H[self.labels, self.decided].sum() / (self.labels.size * labeling.bits))


def evaluate_test_set(params: TransceiverParams, cfg: ExperimentConfig, distance: float,
                      fits: list[WeightFit]) -> list[TestOutcome]:
    """Send the Tausworthe test sequences once and decode them for every (window, weighting).

    Each sequence is padded by Wmax - 1 blocks on both sides so all windows sizes score
    the same ``test_length`` central blocks.
    """
    est = cfg.estimator
    channel = IMDDChannel(cfg.channel.at_distance(distance))
    Wmax = max(est.windows)
    L = est.test_length + 2 * (Wmax - 1)
    msgs = generate_messages(L, cfg.dims.M, "tausworthe", [cfg.seed, _TAG_TEST, int(distance * 1000)],
                             streams=est.test_sequences)
    msgs = np.atleast_2d(msgs)
    rng = np.random.default_rng(derive_seed(cfg.seed, _TAG_TEST, float(distance)))
    fit_by_w = {f.window: f for f in fits}
    variants = [(W, name, a) for W in est.windows
                for name, a in (("uniform", uniform_weights(W)), ("optimized", fit_by_w[W].weights))]
    decided = {(W, name): [] for W, name, _ in variants}
    lo, hi = Wmax - 1, Wmax - 1 + est.test_length
    for s in range(msgs.shape[0]):
        rx = transmit(params, msgs[s:s + 1], channel, rng)[0]
        for W in est.windows:
            finals_all = window_probabilities(params.rx, rx, W)
            for W2, name, a in variants:
                if W2 == W:
                    decided[(W, name)].append(decisions(finals_all.finals(a)[lo:hi]))
    labels = msgs[:, lo:hi].ravel()
    return [TestOutcome(W, name, a, labels, np.concatenate(decided[(W, name)])) for W, name, a in variants]


def sbrnn_rows(params: TransceiverParams, cfg: ExperimentConfig, distance: float,
               labeling_dir: Path | None = None) -> list[ResultRow]:
    M, n, bits = cfg.dims.M, cfg.dims.n, cfg.dims.bits
    params = _inference_params(params, cfg)
    fits = representative_fit(params, cfg, distance)
    outcomes = evaluate_test_set(params, cfg, distance, fits)
    fit_by_w = {f.window: f for f in fits}
    rows = []
    for W in cfg.estimator.windows:
        # the labeling is tuned on the representative sequence's confusion under optimized weights
        tabu = tabu_search(fit_by_w[W].confusion, cfg.labeling.tabu_iters, cfg.labeling.tabu_list,
                           np.random.default_rng(derive_seed(cfg.seed, _TAG_TABU, float(distance), W)))
        random_lab = BitLabeling.random(M, np.random.default_rng(
            derive_seed(cfg.seed, _TAG_RANDOM_LAB, float(distance), W)))
        if labeling_dir is not None:
            save_labeling(labeling_dir / f"labeling_{distance:g}km_W{W}.txt", tabu.labeling)
        labelings = {"tabu": tabu.labeling, "gray": BitLabeling.gray(M), "random": random_lab}
        for out in outcomes:
            if out.window != W:
                continue
            fit = fit_by_w[W]
            xent = fit.xent_optimized if out.weights_name == "optimized" else fit.xent_uniform
            for lname, lab in labelings.items():
                b = out.bler
                rows.append(ResultRow(
                    system="sbrnn", distance_km=float(distance), eta=W * bits, memory=W,
                    bler=b, ber=out.ber(lab), ber_lower_bound=b / bits, labeling=lname,
                    weights=out.weights_name, avg_xent=float(xent),
                    weight_vector=" ".join(repr(float(x)) for x in out.weights),
                    flops_pdb=float(flops_sbrnn_rx(M, n, W)), flops_tx_pdb=float(flops_sbrnn_tx(M, n)),
                    seed=cfg.seed, config_hash=cfg.hash()))
    return rows


def obtain_nu_table(cfg: ExperimentConfig, distance: float, rng):
    path = nu_table_path(cfg, distance)
    if path.exists():
        return load_nu_table(path)
    table = estimate_nu(cfg.pam(), cfg.system_channel().at_distance(distance), cfg.mu,
                        cfg.mlsd.train_symbols, rng)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_nu_table(path, table)
    return table


def mlsd_rows(cfg: ExperimentConfig, distance: float) -> list[ResultRow]:
    pam = cfg.pam()
    mu = cfg.mu
    rng_train = np.random.default_rng(derive_seed(cfg.seed, _TAG_MLSD, float(distance), 0))
    rng_test = np.random.default_rng(derive_seed(cfg.seed, _TAG_MLSD, float(distance), 1))
    table = obtain_nu_table(cfg, distance, rng_train)
    res = mlsd_ber(pam, cfg.system_channel().at_distance(distance), mu, cfg.mlsd.test_symbols, rng_test,
                   table=table, block_len=cfg.mlsd.block_len)
    ser = res.symbol_errors / cfg.mlsd.test_symbols
    return [ResultRow(
        system=cfg.system, distance_km=float(distance), eta=pam.eta(mu), memory=mu,
        bler=ser, ber=res.ber, ber_lower_bound=ser / pam.bits_per_symbol, labeling="gray",
        weights="none", avg_xent=math.nan, weight_vector="",
        flops_pdb=float(flops_mlsd(pam.order, mu, pam.sps)), flops_tx_pdb=0.0,
        seed=cfg.seed, config_hash=cfg.hash())]


def run_distance(cfg: ExperimentConfig, distance: float) -> list[ResultRow]:
    distance = float(distance)
    if distance < 0:
        raise ConfigurationError("distance must be >= 0")
    log.info("%s at %g km", cfg.system, distance)
    if cfg.system == "sbrnn":
        params = obtain_model(cfg, distance)
        lab_dir = output_stem(cfg)
        lab_dir.mkdir(parents=True, exist_ok=True)
        return sbrnn_rows(params, cfg, distance, labeling_dir=lab_dir)
    return mlsd_rows(cfg, distance)


def run_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    """Rows for every configured distance, sorted into canonical order."""
    rows = []
    for d in cfg.distances:
        rows.extend(run_distance(cfg, d))
    return sorted(rows, key=ResultRow.sort_key)


def emit(cfg: ExperimentConfig, rows, formats=("csv",)) -> list[Path]:
    """Write results under ``output_dir`` with the config hash in every file name."""
    stem = output_stem(cfg)
    stem.parent.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        write_csv(stem.with_suffix(".csv"), rows)
        written.append(stem.with_suffix(".csv"))
        stem.with_suffix(".cfg").write_text(dump_config(cfg))
        written.append(stem.with_suffix(".cfg"))
    if "svg" in formats:
        if not rows:
            raise ConfigurationError("cannot plot an empty result set")
        write_svg(stem.with_suffix(".svg"), rows, cfg.hd_fec_threshold)
        written.append(stem.with_suffix(".svg"))
    return written
