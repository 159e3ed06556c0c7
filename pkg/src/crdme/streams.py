"""Reproducible random streams keyed by (master seed, replicate, ...)."""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "derive_seed"]

SEED_MASK = (1 << 64) - 1


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for the given key path.

    The stream depends only on ``master_seed`` and ``key``, never on which
    worker or in which order it is requested.
    """
    ss = np.random.SeedSequence(int(master_seed) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, *key: int) -> int:
    """64-bit child seed, e.g. for one point of a parameter sweep."""
    ss = np.random.SeedSequence(int(master_seed) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
