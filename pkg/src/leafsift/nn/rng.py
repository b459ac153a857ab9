"""SplitMix64 pseudo-random numbers.

Weight initialization, batch shuffling, and the fixed ternary filter banks
all draw from this generator so that results are bit-identical across
platforms and numpy versions.  The algorithm is the standard SplitMix64
mixer:

    state_i = seed + i * 0x9E3779B97F4A7C15          (mod 2^64, i >= 1)
    z = state_i
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9         (mod 2^64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB         (mod 2^64)
    output_i = z ^ (z >> 31)

Uniform doubles in [0, 1) take the top 53 bits: (output >> 11) * 2**-53.
"""

from __future__ import annotations

import numpy as np

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = 0xFFFFFFFFFFFFFFFF


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs for ``seed`` as a uint64 array (vectorized)."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    state = np.uint64(seed & _MASK) + idx * np.uint64(_GAMMA)
    z = (state ^ (state >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def uniform_stream(seed: int, count: int) -> np.ndarray:
    """First ``count`` uniform doubles in [0, 1) for ``seed``."""
    bits = splitmix64_stream(seed, count)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


class SplitMix64:
    """Stateful scalar form of the same sequence, for sequential use."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates; position j for slot i is next_u64() % (i+1)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            items[i], items[j] = items[j], items[i]
