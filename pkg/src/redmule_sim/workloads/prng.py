"""Deterministic 64-bit xorshift* generator used for every synthetic input.

The stream is fully specified so that a seed recorded in a report
reproduces the exact operands on any platform:

- the user seed is scrambled once with SplitMix64 (so seed 0 is valid);
- each draw advances a xorshift64* state (shifts 12, 25, 27) and returns
  the state multiplied by 0x2545F4914F6CDD1D modulo 2**64.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D

NAME = "xorshift64*"


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


class XorShift64Star:
    def __init__(self, seed: int) -> None:
        self.seed = seed
        self.state = splitmix64(seed & _MASK) or 1

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self.state = x
        return (x * _MULT) & _MASK

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi] (inclusive) by rejection-free multiply-shift."""
        span = hi - lo + 1
        return lo + ((self.next_u64() * span) >> 64)
