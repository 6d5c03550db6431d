"""Deterministic derived PRNG streams.

A stream is a PCG64 generator seeded with seed XOR splitmix64(index).
Streams depend only on (seed, index), never on execution order, so
Monte-Carlo work can be sharded across workers without changing any
result.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(x: int) -> int:
    """Finalizer of the splitmix64 generator: a well mixed 64-bit word."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derived_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for one unit of work."""
    return np.random.Generator(np.random.PCG64((seed ^ splitmix64(index + 1)) & _MASK64))
