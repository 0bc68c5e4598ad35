"""Portable deterministic 64-bit RNG (splitmix64).

Every stochastic operation in this package draws from this generator so that
results are bit-identical across platforms and across reimplementations in
other languages. The state advance is the splitmix64 constant gamma; outputs
are the standard splitmix64 finalizer.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """splitmix64 output finalizer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *indices: int) -> int:
    """Derive an independent child seed from a parent seed and index path."""
    z = seed & MASK64
    for i in indices:
        z = mix64((z + GAMMA + (i & MASK64)) & MASK64)
    return z


class SplitMix64:
    """Sequential splitmix64 stream."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GAMMA) & MASK64
        return mix64(self._state)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n) via Lemire's multiply-shift reduction."""
        if n <= 0:
            raise ValueError("randrange() requires n >= 1")
        return (self.next_u64() * n) >> 64

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def choice(self, seq):
        if not seq:
            raise ValueError("choice() on empty sequence")
        return seq[self.randrange(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]


def counter_stream_u64(seed: int, n: int) -> np.ndarray:
    """Vectorized splitmix64: outputs for states seed + (1..n) * gamma.

    Identical to SplitMix64(seed).next_u64() called n times; used where bulk
    draws matter (bootstrap resampling).
    """
    with np.errstate(over="ignore"):
        state = np.uint64(seed) + (np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GAMMA))
        z = state
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))
