"""Deterministic random-number utilities.

Every randomized operation in this package takes an explicit generator
argument; there is no hidden global state. Generators wrap the Philox
counter-based bit generator, so a given seed produces the same stream on
every platform. Parallel pipelines derive one child stream per item with
``child_rng`` instead of sharing a generator.
"""

from __future__ import annotations

import numpy as np

# Fixed lane ids for deriving independent child streams from one
# experiment seed. Values are arbitrary but must never change.
LANE_INIT = 1
LANE_SHUFFLE = 2
LANE_AUGMENT = 3
LANE_DATA = 4
LANE_SUBSET = 5


def make_rng(seed: int) -> np.random.Generator:
    """Create a generator from a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Derive an independent child generator from (seed, key path).

    The same (seed, key) pair always yields the same stream, so per-item
    children can be handed out in any order or in parallel.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    """One draw from [lo, hi); the degenerate interval lo == hi returns lo."""
    if lo > hi:
        raise ValueError(f"uniform: lo={lo} > hi={hi}")
    if lo == hi:
        return float(lo)
    return float(rng.uniform(lo, hi))


def sample_without_replacement(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """Draw m distinct indices from range(n), returned sorted ascending."""
    if m < 0 or m > n:
        raise ValueError(f"sample_without_replacement: need 0 <= m <= n, got m={m} n={n}")
    idx = rng.choice(n, size=m, replace=False)
    return np.sort(idx.astype(np.int64))
