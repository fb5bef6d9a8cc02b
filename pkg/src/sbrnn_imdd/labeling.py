"""Bit-to-message labeling: expected BER under a confusion matrix and Tabu search.

A labeling assigns each zero-based message m a distinct B-bit codeword
``codes[m]``. Messages are equiprobable, so the expected BER of a labeling is the
confusion-weighted mean Hamming distance divided by B.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


def popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros_like(x)
    while x.any():
        count += x & 1
        x = x >> 1
    return count


@dataclass(frozen=True)
class BitLabeling:
    codes: tuple
    bits: int

    def __post_init__(self):
        codes = tuple(int(c) for c in self.codes)
        object.__setattr__(self, "codes", codes)
        if sorted(codes) != list(range(2**self.bits)):
            raise ConfigurationError("labeling must be a bijection onto all 2^B codewords")

    @property
    def M(self) -> int:
        return len(self.codes)

    @classmethod
    def natural(cls, M: int) -> "BitLabeling":
        return cls(tuple(range(M)), _bits_for(M))

    @classmethod
    def gray(cls, M: int) -> "BitLabeling":
        """Gray code assigned to the message index."""
        return cls(tuple(m ^ (m >> 1) for m in range(M)), _bits_for(M))

    @classmethod
    def random(cls, M: int, rng) -> "BitLabeling":
        return cls(tuple(rng.permutation(M)), _bits_for(M))

    def array(self) -> np.ndarray:
        return np.asarray(self.codes, dtype=np.int64)

    def bit_matrix(self) -> np.ndarray:
        """[M, B] bits, most significant first."""
        shifts = np.arange(self.bits - 1, -1, -1)
        return ((self.array()[:, None] >> shifts) & 1).astype(np.uint8)

    def hamming(self) -> np.ndarray:
        c = self.array()
        return popcount(c[:, None] ^ c[None, :])

    def swapped(self, i: int, j: int) -> "BitLabeling":
        codes = list(self.codes)
        codes[i], codes[j] = codes[j], codes[i]
        return BitLabeling(tuple(codes), self.bits)

    def to_lines(self) -> list[str]:
        return [format(c, f"0{self.bits}b") for c in self.codes]

    @classmethod
    def from_lines(cls, lines) -> "BitLabeling":
        lines = [ln.strip() for ln in lines if ln.strip()]
        if not lines:
            raise ConfigurationError("empty labeling file")
        return cls(tuple(int(ln, 2) for ln in lines), len(lines[0]))


def _bits_for(M: int) -> int:
    if M < 2 or M & (M - 1):
        raise ConfigurationError(f"M must be a power of two, got {M}")
    return M.bit_length() - 1


@dataclass
class ConfusionMatrix:
    """Row-stochastic estimate of P(decided | sent); ``unobserved`` lists rows filled uniformly."""

    probs: np.ndarray
    unobserved: tuple = field(default=())

    @property
    def M(self) -> int:
        return self.probs.shape[0]


def estimate_confusion(labels, decisions, M: int) -> ConfusionMatrix:
    labels = np.asarray(labels, dtype=np.int64).ravel()
    decisions = np.asarray(decisions, dtype=np.int64).ravel()
    if labels.size == 0:
        raise ConfigurationError("cannot estimate a confusion matrix from no observations")
    if labels.shape != decisions.shape:
        raise ConfigurationError("labels and decisions differ in length")
    counts = np.zeros((M, M))
    np.add.at(counts, (labels, decisions), 1.0)
    totals = counts.sum(axis=1)
    missing = np.nonzero(totals == 0)[0]
    probs = np.empty_like(counts)
    seen = totals > 0
    probs[seen] = counts[seen] / totals[seen, None]
    probs[~seen] = 1.0 / M
    return ConfusionMatrix(probs, tuple(int(m) for m in missing))


def _probs(C) -> np.ndarray:
    return C.probs if isinstance(C, ConfusionMatrix) else np.asarray(C, dtype=np.float64)


def expected_ber(labeling: BitLabeling, C) -> float:
    P = _probs(C)
    return float((P * labeling.hamming()).sum() / (P.shape[0] * labeling.bits))


def ber_lower_bound(C, bits: int) -> float:
    """One bit error per symbol error."""
    P = _probs(C)
    return float(np.mean(1.0 - np.diag(P)) / bits)


def swap_deltas(codes: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Change of sum_{m<m'} S[m,m'] H[m,m'] for every codeword swap (i, j).

    ``S`` is the symmetrized confusion matrix with zero diagonal.
    """
    H = popcount(codes[:, None] ^ codes[None, :]).astype(np.float64)
    A = S @ H
    d = np.diag(A)
    return A + A.T - d[:, None] - d[None, :] + 2.0 * S * H


@dataclass
class TabuResult:
    labeling: BitLabeling
    cost: float
    start_cost: float
    best_trace: list


def tabu_search(C, iters: int = 1000, list_size: int = 256, rng=None, start: BitLabeling | None = None) -> TabuResult:
    """Tabu search over codeword swaps, minimizing the expected BER.

    Each iteration scores all M(M-1)/2 swaps, applies the best one whose index pair is
    not in the FIFO tabu list (ties: lowest (i, j)), and records it. If every move is
    tabu the best tabu move is taken. Returns the best labeling seen.
    """
    P = _probs(C)
    M = P.shape[0]
    bits = _bits_for(M)
    if iters < 1:
        raise ConfigurationError("iters must be >= 1")
    if start is None:
        start = BitLabeling.random(M, rng if rng is not None else np.random.default_rng())
    S = P + P.T
    np.fill_diagonal(S, 0.0)
    scale = 1.0 / (M * bits)
    iu, ju = np.triu_indices(M, k=1)

    codes = start.array().copy()
    cost = expected_ber(start, P)
    best_codes, best_cost = codes.copy(), cost
    tabu = deque(maxlen=list_size)
    tabu_count = Counter()
    trace = [best_cost]
    for _ in range(iters):
        delta = swap_deltas(codes, S)[iu, ju] * scale
        order = np.lexsort((ju, iu, delta))  # by delta, then (i, j)
        chosen = None
        for idx in order:
            move = (int(iu[idx]), int(ju[idx]))
            if not tabu_count[move]:
                chosen = idx
                break
        if chosen is None:
            chosen = order[0]
        i, j = int(iu[chosen]), int(ju[chosen])
        codes[i], codes[j] = codes[j], codes[i]
        cost += delta[chosen]
        if len(tabu) == tabu.maxlen:
            tabu_count[tabu[0]] -= 1
        tabu.append((i, j))
        tabu_count[(i, j)] += 1
        if cost < best_cost - 1e-15:
            best_codes, best_cost = codes.copy(), cost
        trace.append(best_cost)
    best = BitLabeling(tuple(best_codes), bits)
    return TabuResult(best, expected_ber(best, P), expected_ber(start, P), trace)
