"""Reproducible random streams.

Stream ``key`` of a run with seed ``seed`` is derived from
``SeedSequence(seed, spawn_key=key)``, so it depends only on the pair and
never on how many streams were created before it or on which worker uses it.
"""
from typing import List

import numpy as np

__all__ = ['stream', 'streams', 'derive_seed']


def stream(seed: int, *key: int) -> np.random.Generator:
    spawn_key = tuple(int(part) for part in key) or (0,)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=spawn_key)))


def streams(seed: int, count: int, start: int = 0) -> List[np.random.Generator]:
    return [stream(seed, index) for index in range(start, start + count)]


def derive_seed(seed: int, *key: int) -> int:
    """An integer seed for a sub-run, for APIs that take a seed rather than a generator."""
    spawn_key = tuple(int(part) for part in key)
    return int(np.random.SeedSequence(int(seed), spawn_key=spawn_key).generate_state(1, np.uint64)[0] >> 1)
