"""Deterministic 64-bit PRNG (splitmix64) used wherever datasets must be
reproducible across platforms and numpy versions."""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

RNG_VERSION = "splitmix64/1"


def mix64(z: int) -> int:
    """The splitmix64 finalizer: a bijective 64-bit mix."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_seed(seed: int, index: int) -> int:
    """Stable per-item child seed for a (seed, index) pair."""
    return mix64((seed & MASK64) ^ mix64((index + 1) * _GAMMA))


class SplitMix64:
    """Sequential splitmix64 generator; same stream on every platform."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        return mix64(self._state)

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_uint64() >> 11) * (1.0 / (1 << 53))

    def randint(self, n: int) -> int:
        """Integer in [0, n) via the multiply-shift reduction."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_uint64() * n) >> 64

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def choice(self, seq):
        if not seq:
            raise ValueError("empty sequence")
        return seq[self.randint(len(seq))]

    def shuffle(self, items: list) -> list:
        """In-place Fisher-Yates shuffle; also returns the list."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
