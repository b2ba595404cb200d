"""Reproducible pseudo-random weight matrices.

Weights come from a SplitMix64 stream (Steele/Lea/Flood constants), which is
trivially portable: any implementation seeding the same 64-bit value produces
the same matrix.  Entry (i, j) is filled row-major with the top weight_bits
of the next 64-bit output.
"""

from __future__ import annotations

import numpy as np

from .fixedpoint import BitWidths

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(seed: int):
    """Infinite stream of 64-bit outputs for the given seed."""
    state = seed & _MASK64
    while True:
        state = (state + _GAMMA) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        yield z ^ (z >> 31)


def generate_weights(seed: int, neurons: int, widths: BitWidths) -> np.ndarray:
    """Uniform random N x N weight matrix, fully determined by the seed."""
    stream = splitmix64(seed)
    shift = 64 - widths.weight_bits
    values = [next(stream) >> shift for _ in range(neurons * neurons)]
    return np.array(values, dtype=np.int64).reshape(neurons, neurons)
