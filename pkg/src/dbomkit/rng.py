"""Portable deterministic randomness for index shuffles.

splitmix64 is used for every shuffle the toolkit records, because recorded
split and fold indices must be reproducible bit-for-bit regardless of
platform or library versions.
"""

from __future__ import annotations

from typing import List, MutableSequence

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """splitmix64 stream seeded with an unsigned 64-bit value."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound


def fisher_yates(items: MutableSequence, rng: SplitMix64) -> None:
    """In-place Fisher-Yates shuffle driven by the given stream."""
    for i in range(len(items) - 1, 0, -1):
        j = rng.below(i + 1)
        items[i], items[j] = items[j], items[i]


def shuffled(items: List, rng: SplitMix64) -> List:
    out = list(items)
    fisher_yates(out, rng)
    return out
