"""Seedable, portable random source for the synthetic-campaign generator.

SplitMix64 (Steele, Lea & Flood 2014; the seeding generator of Java's
SplittableRandom) drives a 53-bit uniform, and Gaussian draws come from the
Marsaglia polar transform of those uniforms. Everything is plain integer and
IEEE-754 double arithmetic, so a given seed reproduces the same stream on
any platform, independent of Python or NumPy internals.
"""

from __future__ import annotations

import math

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = 0xFFFFFFFFFFFFFFFF


class SplitMix64:
    """Deterministic 64-bit generator with uniform and Gaussian draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Standard-normal deviate via the Marsaglia polar method.

        The method produces deviates in pairs; the unused one is cached, so
        consecutive calls consume a deterministic number of uniforms.
        """
        if self._spare is not None:
            z = self._spare
            self._spare = None
            return mu + sigma * z
        while True:
            u = 2.0 * self.random() - 1.0
            v = 2.0 * self.random() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                break
        factor = math.sqrt(-2.0 * math.log(s) / s)
        self._spare = v * factor
        return mu + sigma * (u * factor)
