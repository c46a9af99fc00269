"""Deterministic seed derivation.

Every random stream in the package is a PCG64 generator whose seed is derived
from a master seed and a path of integers (tree index, replication index, ...).
Seeds are fixed before any work is scheduled, so results never depend on the
order in which parallel tasks run.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Fold ``path`` into ``master`` with splitmix64; returns a 63-bit seed."""
    state = splitmix64(int(master) & _MASK)
    for p in path:
        state = splitmix64(state ^ (int(p) & _MASK))
    return state >> 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
