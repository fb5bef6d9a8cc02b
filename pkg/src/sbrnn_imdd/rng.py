"""Message generators.

Training data come from the Mersenne twister (numpy's MT19937 bit generator) and
test data from a combined Tausworthe generator (L'Ecuyer's taus88), so the two sets
are drawn by unrelated algorithms.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

FAMILIES = ("mersenne_twister", "tausworthe")

_MASKS = (np.uint32(0xFFFFFFFE), np.uint32(0xFFFFFFF8), np.uint32(0xFFFFFFF0))


class Taus88:
    """Three-component combined Tausworthe generator, run on ``streams`` independent states."""

    def __init__(self, seed, streams: int = 1):
        state = np.random.SeedSequence(seed).generate_state(3 * streams, dtype=np.uint32)
        s = state.reshape(3, streams)
        # seeds must satisfy s1 > 1, s2 > 7, s3 > 15
        s[0] |= np.uint32(2)
        s[1] |= np.uint32(8)
        s[2] |= np.uint32(16)
        self.s1, self.s2, self.s3 = s[0].copy(), s[1].copy(), s[2].copy()

    @classmethod
    def from_state(cls, s1, s2, s3) -> "Taus88":
        """Generator with explicit component states (one entry per stream)."""
        g = cls.__new__(cls)
        g.s1, g.s2, g.s3 = (np.atleast_1d(np.asarray(s, dtype=np.uint32)).copy() for s in (s1, s2, s3))
        return g

    @property
    def streams(self) -> int:
        return self.s1.shape[0]

    def next_uint32(self) -> np.ndarray:
        s1, s2, s3 = self.s1, self.s2, self.s3
        b = ((s1 << np.uint32(13)) ^ s1) >> np.uint32(19)
        s1 = ((s1 & _MASKS[0]) << np.uint32(12)) ^ b
        b = ((s2 << np.uint32(2)) ^ s2) >> np.uint32(25)
        s2 = ((s2 & _MASKS[1]) << np.uint32(4)) ^ b
        b = ((s3 << np.uint32(3)) ^ s3) >> np.uint32(11)
        s3 = ((s3 & _MASKS[2]) << np.uint32(17)) ^ b
        self.s1, self.s2, self.s3 = s1, s2, s3
        return s1 ^ s2 ^ s3

    def uint32(self, count: int) -> np.ndarray:
        """Array [streams, count] of raw 32-bit outputs."""
        if self.streams == 1:
            return self._scalar_uint32(count)[None, :]
        out = np.empty((self.streams, count), dtype=np.uint32)
        for j in range(count):
            out[:, j] = self.next_uint32()
        return out

    def _scalar_uint32(self, count: int) -> np.ndarray:
        # plain ints: much faster than numpy scalars for a single long stream
        s1, s2, s3 = int(self.s1[0]), int(self.s2[0]), int(self.s3[0])
        out = [0] * count
        for j in range(count):
            s1 = (((s1 & 0xFFFFFFFE) << 12) & 0xFFFFFFFF) ^ ((((s1 << 13) & 0xFFFFFFFF) ^ s1) >> 19)
            s2 = (((s2 & 0xFFFFFFF8) << 4) & 0xFFFFFFFF) ^ ((((s2 << 2) & 0xFFFFFFFF) ^ s2) >> 25)
            s3 = (((s3 & 0xFFFFFFF0) << 17) & 0xFFFFFFFF) ^ ((((s3 << 3) & 0xFFFFFFFF) ^ s3) >> 11)
            out[j] = s1 ^ s2 ^ s3
        self.s1[0], self.s2[0], self.s3[0] = s1, s2, s3
        return np.array(out, dtype=np.uint32)

    def integers(self, M: int, count: int) -> np.ndarray:
        """Uniform integers in [0, M) via the high bits (multiply-shift)."""
        u = self.uint32(count).astype(np.uint64)
        return ((u * np.uint64(M)) >> np.uint64(32)).astype(np.int64)


def generate_messages(count: int, M: int, family: str, seed, streams: int | None = None) -> np.ndarray:
    """i.i.d. uniform zero-based messages in [0, M).

    With ``streams`` the result has shape [streams, count]; each Tausworthe stream has
    its own state, Mersenne-twister rows are consecutive draws of one stream.
    """
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown RNG family {family!r}; expected one of {FAMILIES}")
    rows = 1 if streams is None else streams
    if family == "mersenne_twister":
        gen = np.random.Generator(np.random.MT19937(seed))
        out = gen.integers(0, M, size=(rows, count))
    else:
        out = Taus88(seed, streams=rows).integers(M, count)
    return out[0] if streams is None else out
