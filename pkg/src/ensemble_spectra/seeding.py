"""Seed handling: one explicit 64-bit seed, child streams by hashing.

Child streams come from ``numpy.random.SeedSequence(seed, spawn_key=stream)``,
which hashes the (seed, stream) pair, so a sample's randomness depends only on
its stream key and never on how work is split across workers.
"""

from __future__ import annotations

import numpy as np

SEED_MAX = 2**64 - 1


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return seed


def child_seed(seed, *stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(s) for s in stream))


def make_rng(seed=None, *stream: int) -> np.random.Generator:
    """Generator from an int seed (optionally a child stream), a SeedSequence
    or an existing Generator (returned as is)."""
    if isinstance(seed, np.random.Generator):
        if stream:
            raise ValueError("cannot derive a child stream from a Generator")
        return seed
    if isinstance(seed, np.random.SeedSequence):
        if stream:
            seed = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key + stream)
        return np.random.Generator(np.random.PCG64(seed))
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.Generator(np.random.PCG64(child_seed(seed, *stream)))
