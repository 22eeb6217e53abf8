"""Seeded random streams.

Every random draw in the simulator comes from a PCG64 generator keyed by a
64-bit seed plus a spawn key. A substream is identified by
``(seed, stream, *indices)`` so results never depend on execution order or on
how many workers a sweep uses.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from snn_fault_sim.errors import InvalidArgumentError

GENERATOR_NAME = "PCG64"
MAX_SEED = 2**64 - 1


class Stream(IntEnum):
    """Top-level spawn keys, one per consumer of randomness."""

    WEIGHT_INIT = 1
    TRAINING = 2
    ENCODING = 3
    FAULT_MAP = 4
    TMR = 5
    LABELING = 6


def _seed_sequence(seed: int, key: tuple[int, ...]) -> np.random.SeedSequence:
    if not 0 <= seed <= MAX_SEED:
        raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if any(k < 0 for k in key):
        raise InvalidArgumentError(f"spawn key entries must be non-negative, got {key}")
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(_seed_sequence(seed, key)))


def derive_seed(seed: int, *key: int) -> int:
    """Derive a child 64-bit seed, e.g. the seed of one fault map in a sweep."""
    state = _seed_sequence(seed, key).generate_state(1, dtype=np.uint64)
    return int(state[0])
