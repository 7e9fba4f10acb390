"""Seeded random streams.

Every stochastic quantity in the package is drawn from a stream derived from a
master seed plus an integer path, e.g. ``stream(seed, NS_OUTER, group, r)``.
The path is used as the ``spawn_key`` of a :class:`numpy.random.SeedSequence`,
so a stream depends only on (seed, path) and never on how many draws were
taken from sibling streams.  This is what lets a single experiment row, or a
single bootstrap replicate, be regenerated in isolation.
"""
from __future__ import annotations

import numpy as np

# namespaces (first element of a spawn path); keep these stable, results depend on them
NS_SERIES = 1
NS_BOOTSTRAP = 2
NS_OUTER = 3
NS_INNER = 4
NS_HELDOUT = 5
NS_PILOT = 6
NS_SIDE_MC = 7

MASK64 = (1 << 64) - 1


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return a PCG64 generator for ``(seed, path)``."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: int, *path: int) -> int:
    """A 64-bit integer seed summarising ``(seed, path)``, for reporting."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
