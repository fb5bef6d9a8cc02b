"""Floating point operations per decoded bit for the SBRNN transceiver and the MLSD receiver.

Closed-form counts only. Not modelled: inactive (always-zero) ReLU units, and the
fact that one-hot products at the transmitter reduce to embedding lookups; both
would lower the SBRNN counts in practice.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError


def _log2_order(M: int) -> int:
    if M < 2 or M & (M - 1):
        raise ConfigurationError(f"alphabet size must be a power of two >= 2, got {M}")
    return M.bit_length() - 1


def flops_sbrnn_tx(M: int, n: int) -> float:
    """2n(2(M + n) + 1) / log2 M."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    return 2 * n * (2 * (M + n) + 1) / _log2_order(M)


def flops_sbrnn_rx(M: int, n: int, window: int) -> float:
    """W(24M^2 + 8Mn + 5M + 2) / log2 M."""
    if window < 0:
        raise ConfigurationError("window must be >= 0")
    return window * (24 * M * M + 8 * M * n + 5 * M + 2) / _log2_order(M)


def flops_mlsd(M: int, mu: int, sps: int = 2) -> float:
    """Viterbi cost per decoded bit, M^(mu+1) branches per trellis section.

    Each branch needs 3*sps + (sps - 1) FLOPS for its metric, one addition and one
    comparison; for sps = 2 this gives 9 M^(mu+1) / log2 M.
    """
    if M not in (2, 4):
        raise ConfigurationError(f"PAM order must be 2 or 4, got {M}")
    if mu < 0:
        raise ConfigurationError("mu must be >= 0")
    per_branch = 3 * sps + (sps - 1) + 2
    return per_branch * M ** (mu + 1) / _log2_order(M)


@dataclass(frozen=True)
class FlopsReport:
    M: int
    n: int
    window: int
    pam_order: int
    mu: int
    sps: int
    sbrnn_tx: float
    sbrnn_rx: float
    mlsd: float


def flops_report(M: int, n: int, window: int, pam_order: int, mu: int, sps: int = 2) -> FlopsReport:
    return FlopsReport(M, n, window, pam_order, mu, sps, flops_sbrnn_tx(M, n),
                       flops_sbrnn_rx(M, n, window), flops_mlsd(pam_order, mu, sps))


def eta_sbrnn(M: int, window: int) -> int:
    return window * _log2_order(M)


def eta_mlsd(pam_order: int, mu: int) -> int:
    return mu * _log2_order(pam_order)


def crossover_window(M: int, n: int, pam_order: int, max_eta: int = 64):
    """Smallest matched eta at which the SBRNN receiver needs fewer FLOPS than MLSD, or None."""
    b_nn, b_pam = _log2_order(M), _log2_order(pam_order)
    for eta in range(1, max_eta + 1):
        if eta % b_nn or eta % b_pam:
            continue
        if flops_sbrnn_rx(M, n, eta // b_nn) < flops_mlsd(pam_order, eta // b_pam):
            return eta
    return None
