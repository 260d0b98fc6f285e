"""Counter-based deterministic random streams.

Every stochastic choice in the package (weight init, dropout, channel
masking, data synthesis, shuffling) draws from an :class:`RngStream` so a
run is reproducible from its seed alone, independent of platform and of
how work is split across processes.
"""
from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1


def _mix(*keys) -> int:
    """Fold arbitrary ints/strings into a stable 64-bit sub-seed."""
    h = hashlib.sha256()
    for k in keys:
        h.update(repr(k).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")


class RngStream:
    """Deterministic random stream keyed by ``(seed, counter)``.

    Each draw derives a fresh Philox generator from the pair and bumps the
    counter, so the sequence of draws depends only on the seed and the
    order of calls. Philox is counter-based and identical on all
    platforms; each call gets its own 2^128 block of counter space, so
    streams never overlap however many values one call consumes.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _U64
        self.counter = int(counter)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, counter={self.counter})"

    def spawn(self, *keys) -> "RngStream":
        """Derive an independent child stream from hashable keys."""
        return RngStream(_mix(self.seed, *keys))

    def _next(self) -> np.random.Generator:
        gen = np.random.Generator(
            np.random.Philox(counter=self.counter << 128, key=self.seed)
        )
        self.counter += 1
        return gen

    def uniform(self, low=0.0, high=1.0, size=None, dtype=np.float64):
        out = self._next().uniform(low, high, size)
        return np.asarray(out, dtype=dtype) if size is not None else float(out)

    def normal(self, scale=1.0, size=None, dtype=np.float64):
        out = self._next().normal(0.0, scale, size)
        return np.asarray(out, dtype=dtype) if size is not None else float(out)

    def integers(self, low, high, size=None):
        """Uniform integers in [low, high) as int64."""
        out = self._next().integers(low, high, size=size, dtype=np.int64)
        return out if size is not None else int(out)

    def permutation(self, n: int) -> np.ndarray:
        return self._next().permutation(n)

    def choice(self, n: int, k: int) -> np.ndarray:
        """k distinct indices drawn uniformly from range(n)."""
        if not 0 < k <= n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        return self._next().choice(n, size=k, replace=False)

    def keep_mask(self, drop_p: float, shape) -> np.ndarray:
        """Boolean mask, True with probability 1 - drop_p per element."""
        return self._next().random(shape) >= drop_p
