"""PAM transmission with maximum-likelihood sequence detection.

Transmitter: Gray-labelled PAM2/PAM4 levels in the MZM drive range, upsampled to
two samples per symbol and shaped by a root-raised-cosine filter.

Receiver: two samples per symbol feed a Viterbi processor whose branch metric is the
squared Euclidean distance between the square-rooted samples and their expected
value ``nu`` for the window of ``mu + 1`` symbols centred on the current symbol
(``mu/2`` pre-cursor and ``mu/2`` post-cursor symbols). ``nu`` is estimated from a
long training transmission.

Symbol windows are encoded as base-M integers with the oldest symbol most
significant; a trellis state is a window minus its oldest symbol's successor, i.e.
the ``mu`` most recent symbols.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import resample_poly

from .channel import ChannelConfig, Waveform, channel_forward
from .errors import ConfigurationError

log = logging.getLogger(__name__)

PAM_LEVELS = {
    2: (0.0, math.pi / 4),
    4: (0.0, math.pi / 12, math.pi / 6, math.pi / 4),
}
KNOWN_SYMBOL = 0


@dataclass(frozen=True)
class PamConfig:
    order: int = 2
    rolloff: float = 0.25
    sps: int = 2
    rrc_span: int = 16  # symbols on each side of the peak
    dac_rate: float = 84e9

    def __post_init__(self):
        if self.order not in PAM_LEVELS:
            raise ConfigurationError(f"PAM order must be 2 or 4, got {self.order}")
        if self.sps < 1 or self.rrc_span < 1 or not 0 < self.rolloff <= 1:
            raise ConfigurationError("invalid pulse-shaping parameters")

    @property
    def levels(self) -> np.ndarray:
        return np.asarray(PAM_LEVELS[self.order])

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.order))

    @property
    def symbol_rate(self) -> float:
        return self.dac_rate / self.sps

    def eta(self, mu: int) -> int:
        return mu * self.bits_per_symbol


def gray_code(k):
    return k ^ (k >> 1)


def gray_bits(symbols, order: int) -> np.ndarray:
    """Level indices -> Gray bits [N, log2(order)], MSB first."""
    b = int(math.log2(order))
    g = gray_code(np.asarray(symbols, dtype=np.int64))
    return ((g[:, None] >> np.arange(b - 1, -1, -1)) & 1).astype(np.uint8)


def bits_to_symbols(bits, order: int) -> np.ndarray:
    b = int(math.log2(order))
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % b:
        raise ConfigurationError(f"bit count {bits.size} not divisible by {b}")
    words = bits.reshape(-1, b) @ (1 << np.arange(b - 1, -1, -1))
    inverse = np.argsort(gray_code(np.arange(order)))
    return inverse[words]


def rrc_taps(rolloff: float, sps: int, span: int) -> np.ndarray:
    """Root-raised-cosine impulse response over +-span symbols.

    Scaled so each polyphase branch has unit DC gain: a run of identical symbols is
    reproduced at its own level.
    """
    t = np.arange(-span * sps, span * sps + 1) / sps
    b = rolloff
    h = np.empty_like(t)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            h[i] = 1 - b + 4 * b / math.pi
        elif abs(abs(ti) - 1 / (4 * b)) < 1e-12:
            h[i] = b / math.sqrt(2) * ((1 + 2 / math.pi) * math.sin(math.pi / (4 * b))
                                       + (1 - 2 / math.pi) * math.cos(math.pi / (4 * b)))
        else:
            h[i] = (math.sin(math.pi * ti * (1 - b)) + 4 * b * ti * math.cos(math.pi * ti * (1 + b))) / (
                math.pi * ti * (1 - (4 * b * ti) ** 2))
    return h * sps / h.sum()


def shape_symbols(levels: np.ndarray, cfg: PamConfig) -> np.ndarray:
    """Upsample by sps and filter; sample k*sps carries symbol k's peak."""
    up = np.zeros(len(levels) * cfg.sps)
    up[::cfg.sps] = levels
    taps = rrc_taps(cfg.rolloff, cfg.sps, cfg.rrc_span)
    return np.convolve(up, taps, mode="full")[cfg.rrc_span * cfg.sps:][:len(up)]


def pam_modulate(bits, cfg: PamConfig) -> Waveform:
    """Gray-map bits to PAM levels and pulse-shape at ``cfg.sps`` samples per symbol."""
    symbols = bits_to_symbols(bits, cfg.order)
    return Waveform(shape_symbols(cfg.levels[symbols], cfg), cfg.dac_rate)


def to_simulation_rate(w: Waveform, oversampling: int) -> Waveform:
    if oversampling == 1:
        return w
    x = resample_poly(w.numpy(), oversampling, 1)
    return Waveform(x, w.rate * oversampling)


def transmit_symbols(symbols, pam: PamConfig, ch: ChannelConfig, rng) -> np.ndarray:
    """Send level indices through the channel; returns received samples [N_sym, sps]."""
    if abs(ch.dac_rate - pam.dac_rate) > 1e-6 * pam.dac_rate:
        raise ConfigurationError("PAM and channel DAC rates differ")
    drive = Waveform(shape_symbols(pam.levels[np.asarray(symbols)], pam), pam.dac_rate)
    rx, _ = channel_forward(to_simulation_rate(drive, ch.oversampling), ch, rng)
    y = rx.numpy()
    per_symbol = pam.sps * ch.oversampling
    n_sym = len(symbols)
    idx = np.arange(n_sym)[:, None] * per_symbol + np.arange(pam.sps)[None, :] * ch.oversampling
    return y[idx]


def window_indices(symbols, order: int, mu: int) -> np.ndarray:
    """Base-order window codes for every full window of mu+1 symbols (centre k, k = mu/2 ..)."""
    symbols = np.asarray(symbols, dtype=np.int64)
    if len(symbols) < mu + 1:
        return np.zeros(0, dtype=np.int64)
    views = np.lib.stride_tricks.sliding_window_view(symbols, mu + 1)
    weights = order ** np.arange(mu, -1, -1, dtype=np.int64)
    return views @ weights


def window_of(sigma, x, order: int) -> int:
    """Window code for state sigma = (mu/2 pre-cursor symbols, mu/2 post-cursor symbols) and centre x."""
    sigma = list(sigma)
    if len(sigma) % 2:
        raise ConfigurationError("state length mu must be even")
    h = len(sigma) // 2
    code = 0
    for s in sigma[:h] + [x] + sigma[h:]:
        code = code * order + int(s)
    return code


@dataclass
class NuTable:
    """Expected sqrt-samples per (window, sample phase), with observation counts.

    ``sums``/``sumsq`` are running sums so tables built from separate chunks merge.
    """

    order: int
    mu: int
    sps: int
    sums: np.ndarray  # [order**(mu+1), sps]
    sumsq: np.ndarray
    counts: np.ndarray  # [order**(mu+1)]

    @classmethod
    def empty(cls, order: int, mu: int, sps: int) -> "NuTable":
        n = order ** (mu + 1)
        return cls(order, mu, sps, np.zeros((n, sps)), np.zeros((n, sps)), np.zeros(n, dtype=np.int64))

    @property
    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts[:, None] > 0, self.sums / np.maximum(self.counts, 1)[:, None], np.nan)

    @property
    def variances(self) -> np.ndarray:
        c = np.maximum(self.counts, 1)[:, None]
        m = self.sums / c
        return np.where(self.counts[:, None] > 0, np.maximum(self.sumsq / c - m**2, 0.0), np.nan)

    @property
    def coverage(self) -> float:
        return float(np.mean(self.counts > 0))

    def accumulate(self, symbols, samples):
        """Add observations: ``symbols`` [N] level indices, ``samples`` [N, sps] received samples."""
        h = self.mu // 2
        codes = window_indices(symbols, self.order, self.mu)
        root = np.sqrt(np.maximum(np.asarray(samples)[h:h + len(codes)], 0.0))
        n = self.counts.size
        self.counts += np.bincount(codes, minlength=n)
        for l in range(self.sps):
            self.sums[:, l] += np.bincount(codes, weights=root[:, l], minlength=n)
            self.sumsq[:, l] += np.bincount(codes, weights=root[:, l] ** 2, minlength=n)
        return self

    def merge(self, other: "NuTable") -> "NuTable":
        if (self.order, self.mu, self.sps) != (other.order, other.mu, other.sps):
            raise ConfigurationError("cannot merge tables of different trellis shape")
        return NuTable(self.order, self.mu, self.sps, self.sums + other.sums, self.sumsq + other.sumsq,
                       self.counts + other.counts)

    def metric_table(self) -> np.ndarray:
        """Means with unobserved cells set to +inf (their branches are pruned)."""
        m = self.means
        return np.where(np.isnan(m), np.inf, m)


def estimate_nu(pam: PamConfig, ch: ChannelConfig, mu: int, train_symbols: int = 10**7, rng=None,
                chunk: int = 1 << 16, guard: int = 64) -> NuTable:
    """Estimate nu from a random symbol stream sent in independent chunks.

    ``guard`` symbols at both ends of every chunk are excluded to avoid edge transients.
    """
    if mu < 0 or mu % 2:
        raise ConfigurationError(f"mu must be a nonnegative even integer, got {mu}")
    rng = rng if rng is not None else np.random.default_rng()
    table = NuTable.empty(pam.order, mu, pam.sps)
    h = mu // 2
    done = 0
    while done < train_symbols:
        useful = min(chunk, train_symbols - done)
        n_sym = useful + 2 * (guard + h)
        symbols = rng.integers(0, pam.order, size=n_sym)
        samples = transmit_symbols(symbols, pam, ch, rng)
        table.accumulate(symbols[guard:n_sym - guard], samples[guard:n_sym - guard])
        done += useful
    if table.coverage < 1.0:
        log.warning("nu table covers %.1f%% of %d cells at mu=%d; raise train_symbols",
                    100 * table.coverage, table.counts.size, mu)
    return table


def branch_metric(y, window: int, table: NuTable | np.ndarray) -> float:
    """sum_l (sqrt(y_l) - nu_l)^2 for one symbol's samples; +inf for an unobserved window."""
    nu = table.metric_table() if isinstance(table, NuTable) else np.asarray(table)
    root = np.sqrt(np.maximum(np.asarray(y, dtype=np.float64), 0.0))
    return float(np.sum((root - nu[window]) ** 2))


def branch_metrics(samples, nu: np.ndarray) -> np.ndarray:
    """All window metrics for every symbol: [N_sym, order**(mu+1)]."""
    root = np.sqrt(np.maximum(np.asarray(samples, dtype=np.float64), 0.0))
    return ((root[:, None, :] - nu[None, :, :]) ** 2).sum(axis=-1)


def viterbi_detect(samples, table: NuTable, known: int = KNOWN_SYMBOL) -> np.ndarray:
    """Minimum sequence-metric level indices for the data symbols whose samples are given.

    ``samples`` is [N_sym, sps]; the data block is assumed to be framed by mu/2 known
    symbols (level index ``known``) on each side.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != table.sps:
        raise ConfigurationError(f"samples must be [N_sym, {table.sps}], got {samples.shape}")
    M, mu = table.order, table.mu
    nu = table.metric_table()
    N = samples.shape[0]
    if N == 0:
        return np.zeros(0, dtype=np.int64)
    if mu == 0:
        return np.argmin(branch_metrics(samples, nu), axis=1)
    h = mu // 2
    S = M**mu
    # padded coordinates: u[0:h] known, u[h:h+N] data, u[h+N:] known; state before data k is u[k:k+mu]
    total = N + mu
    is_known = np.zeros(total, dtype=bool)
    is_known[:h] = True
    is_known[h + N:] = True
    digits = (np.arange(S)[:, None] // M ** np.arange(mu - 1, -1, -1)) % M  # [S, mu], oldest first
    ok = np.ones(S, dtype=bool)
    for j in range(mu):
        if is_known[j]:
            ok &= digits[:, j] == known
    metric = np.where(ok, 0.0, np.inf)
    newest = np.arange(S) % M
    surv = np.empty((N, S), dtype=np.uint8)
    for k in range(N):
        lam = branch_metrics(samples[k:k + 1], nu)[0].reshape(M, S)
        prev = np.repeat(metric.reshape(M, S // M), M, axis=1)
        cand = prev + lam
        best = np.argmin(cand, axis=0)
        metric = cand[best, np.arange(S)]
        if is_known[k + mu]:
            metric = np.where(newest == known, metric, np.inf)
        surv[k] = best
    s = int(np.argmin(metric))
    out = np.empty(N, dtype=np.int64)
    for k in range(N - 1, -1, -1):
        p = int(surv[k, s])
        window = p * S + s
        out[k] = (window // M**h) % M
        s = p * (S // M) + s // M
    return out


def sequence_metric(samples, symbols_padded, table: NuTable) -> float:
    """Lambda_T for a given padded symbol sequence (mu/2 known symbols at both ends)."""
    codes = window_indices(symbols_padded, table.order, table.mu)
    lam = branch_metrics(samples, table.metric_table())
    return float(lam[np.arange(len(codes)), codes].sum())


def frame(data, block_len: int, h: int, known: int = KNOWN_SYMBOL) -> np.ndarray:
    """Interleave data blocks with runs of h known symbols: K D1 K D2 ... K."""
    data = np.asarray(data, dtype=np.int64)
    parts = [np.full(h, known)]
    for start in range(0, len(data), block_len):
        parts += [data[start:start + block_len], np.full(h, known)]
    return np.concatenate(parts)


@dataclass
class MlsdResult:
    ber: float
    bit_errors: int
    bits: int
    symbol_errors: int
    coverage: float


def mlsd_ber(pam: PamConfig, ch: ChannelConfig, mu: int, test_symbols: int, rng, table: NuTable | None = None,
             train_symbols: int = 10**7, block_len: int = 2048) -> MlsdResult:
    """PAM modulation -> channel -> Viterbi -> Gray demapping, counted over data symbols."""
    if table is None:
        table = estimate_nu(pam, ch, mu, train_symbols, rng)
    if table.mu != mu or table.order != pam.order:
        raise ConfigurationError("nu table does not match the requested trellis")
    h = mu // 2
    data = rng.integers(0, pam.order, size=test_symbols)
    stream = frame(data, block_len, h)
    samples = transmit_symbols(stream, pam, ch, rng)
    decided = np.empty_like(data)
    pos = h
    for start in range(0, test_symbols, block_len):
        n = min(block_len, test_symbols - start)
        decided[start:start + n] = viterbi_detect(samples[pos:pos + n], table)
        pos += n + h
    bit_err = int(np.sum(gray_bits(data, pam.order) != gray_bits(decided, pam.order)))
    n_bits = test_symbols * pam.bits_per_symbol
    return MlsdResult(bit_err / n_bits, bit_err, n_bits, int(np.sum(data != decided)), table.coverage)
