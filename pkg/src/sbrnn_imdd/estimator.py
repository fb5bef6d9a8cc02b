"""Sliding-window sequence estimation and error counting.

A stream of ``T + W - 1`` received blocks is decoded by ``T`` overlapping windows of
``W`` blocks. Block ``i`` (zero-based) receives one probability vector from each
window that covers it; the vector produced by the window starting at ``i - k`` is
``p_i^(i-k)``, k = 0..W-1. The first ``W - 1`` blocks average whatever estimates
exist; fully covered blocks use a convex combination with weights ``a[k]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .autoencoder import RxParams, rx_decode
from .errors import ConfigurationError

LOG_FLOOR = 1e-30


def uniform_weights(window: int) -> np.ndarray:
    return np.full(window, 1.0 / window)


def _check_weights(a, window):
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (window,):
        raise ConfigurationError(f"weight vector has shape {a.shape}, expected ({window},)")
    if (a < 0).any() or abs(a.sum() - 1.0) > 1e-10:
        raise ConfigurationError("weights must be nonnegative and sum to 1")
    return a


@dataclass
class ProbabilityTensor:
    """Per-window receiver outputs: ``per_window[t, j]`` is the estimate of block t + j
    produced by the window starting at block t. Shape [T, W, M]."""

    per_window: np.ndarray

    @property
    def window(self) -> int:
        return self.per_window.shape[1]

    @property
    def T(self) -> int:
        return self.per_window.shape[0]

    def estimates(self) -> np.ndarray:
        """``G[r, k] = p_i^(i-k)`` for the fully covered blocks i = W-1 .. T-1 (r = i - W + 1)."""
        W, T = self.window, self.T
        return np.stack([self.per_window[W - 1 - k:T - k, k] for k in range(W)], axis=1)

    def finals(self, a=None) -> np.ndarray:
        """Final probability vectors p_0 .. p_{T-1}, shape [T, M]."""
        W, T = self.window, self.T
        if T < W:
            raise ConfigurationError(f"need at least W={W} windows, got {T}")
        a = uniform_weights(W) if a is None else _check_weights(a, W)
        out = np.empty((T, self.per_window.shape[2]))
        for i in range(W - 1):
            out[i] = np.mean([self.per_window[i - k, k] for k in range(i + 1)], axis=0)
        out[W - 1:] = np.einsum("rkm,k->rm", self.estimates(), a)
        return out


def window_probabilities(rx: RxParams, blocks, window: int, chunk: int = 4096) -> ProbabilityTensor:
    """Decode every length-``window`` window of ``blocks`` ([L, n]) from zero initial states."""
    blocks = torch.as_tensor(np.asarray(blocks), dtype=rx.W_fwd.dtype)
    if window < 1:
        raise ConfigurationError("window must be >= 1")
    L = blocks.shape[0]
    T = L - window + 1
    if T < 1:
        raise ConfigurationError(f"{L} blocks cannot fill a window of {window}")
    windows = blocks.unfold(0, window, 1).transpose(-1, -2)  # [T, W, n]
    out = []
    with torch.no_grad():
        for start in range(0, T, chunk):
            out.append(rx_decode(windows[start:start + chunk], rx).double().numpy())
    return ProbabilityTensor(np.concatenate(out, axis=0))


def slide(rx: RxParams, blocks, window: int, a=None) -> np.ndarray:
    """Final probability vectors for the T fully estimated blocks of ``T + W - 1`` received blocks."""
    return window_probabilities(rx, blocks, window).finals(a)


def average_cross_entropy(a, R: np.ndarray) -> float:
    """Mean of -log(R @ a); ``R[r, k]`` is the probability the k-th estimate gives the true message."""
    return float(-np.mean(np.log(np.maximum(R @ a, LOG_FLOOR))))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {a >= 0, sum(a) = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def true_message_probabilities(tensor: ProbabilityTensor | np.ndarray, labels) -> np.ndarray:
    G = tensor.estimates() if isinstance(tensor, ProbabilityTensor) else np.asarray(tensor)
    labels = np.asarray(labels)
    if labels.shape[0] != G.shape[0]:
        raise ConfigurationError(f"{labels.shape[0]} labels for {G.shape[0]} estimated blocks")
    return G[np.arange(G.shape[0]), :, labels]


def optimize_weights(tensor, labels, tol: float = 1e-9, max_iter: int = 100_000) -> np.ndarray:
    """Minimize the average cross entropy of the combined estimate over the simplex.

    ``labels`` are the true messages of the fully covered blocks (``tensor.estimates()``
    rows).
    """
    return fit_weights(true_message_probabilities(tensor, labels), tol, max_iter)


def fit_weights(R: np.ndarray, tol: float = 1e-9, max_iter: int = 100_000) -> np.ndarray:
    """Simplex-constrained minimizer of ``average_cross_entropy(a, R)``.

    Projected gradient descent with backtracking, started from uniform weights.
    Stops when the gradient-mapping norm drops below ``tol`` or when a sufficient-decrease
    step no longer lowers the cost in floating point.
    """
    R = np.asarray(R, dtype=np.float64)
    W = R.shape[1]
    a = uniform_weights(W)
    if W == 1:
        return a
    if np.allclose(R, R[:, :1], rtol=0, atol=1e-15):
        return a
    f = average_cross_entropy(a, R)
    f0 = f
    step = 1.0
    for _ in range(max_iter):
        mix = np.maximum(R @ a, LOG_FLOOR)
        grad = -(R / mix[:, None]).mean(axis=0)
        while True:
            cand = project_simplex(a - step * grad)
            d = cand - a
            f_cand = average_cross_entropy(cand, R)
            if f_cand <= f + grad @ d + (d @ d) / (2 * step) or step < 1e-20:
                break
            step *= 0.5
        mapping_norm = np.linalg.norm(d) / step
        if not f_cand < f:
            break  # exact arithmetic guarantees a decrease; rounding has taken over
        a, f = cand, f_cand
        if mapping_norm < tol:
            break
        step *= 2.0
    # never return something worse than the uniform start
    return a if f <= f0 else uniform_weights(W)


def decisions(finals) -> np.ndarray:
    """Argmax per row; ties resolve to the lowest index."""
    return np.argmax(np.asarray(finals), axis=-1)


def bler(labels, finals) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ConfigurationError("no fully estimated blocks")
    if labels.shape[0] != np.asarray(finals).shape[0]:
        raise ConfigurationError("labels and final estimates differ in length")
    return float(np.mean(decisions(finals) != labels))


def ber(labels, finals, labeling) -> float:
    """Bit errors under ``labeling`` divided by B * |T_e|."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ConfigurationError("no fully estimated blocks")
    dec = decisions(finals)
    if dec.shape != labels.shape:
        raise ConfigurationError("labels and final estimates differ in length")
    return float(labeling.hamming()[labels, dec].sum() / (labeling.bits * labels.size))
