"""SplitMix64 pseudo-random generator.

Counter based, so the scalar stream and the vectorised ``batch`` stream are
the same sequence. Used only by the evaluation harness and the synthetic
corpus generator, where reports must be reproducible bit for bit.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1
_INV_2_53 = 1.0 / (1 << 53)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        return _mix(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def below(self, n: int) -> int:
        """Integer in [0, n)."""
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        return int(self.random() * n)

    def batch(self, size: int) -> np.ndarray:
        """Next ``size`` outputs as a uint64 array (advances the state)."""
        steps = np.arange(1, size + 1, dtype=np.uint64)
        z = np.uint64(self.state) + steps * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self.state = (self.state + size * _GOLDEN) & _MASK
        return z

    def random_batch(self, size: int) -> np.ndarray:
        return (self.batch(size) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def sample(self, population: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(population)`` in random order."""
        if not 0 <= k <= population:
            raise ValueError(f"cannot draw {k} from {population}")
        keys = self.batch(population)
        return np.argsort(keys, kind="stable")[:k]

    def spawn(self) -> "SplitMix64":
        return SplitMix64(self.next_u64())
