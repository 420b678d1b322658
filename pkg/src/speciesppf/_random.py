"""Seed handling: every stochastic routine takes an explicit seed.

Substreams are derived by counter splitting (``SeedSequence(seed,
spawn_key=(a, b, ...))``) so a block of work always sees the same stream,
whatever order or worker it runs on.
"""

import numpy as np


def as_seed_sequence(seed, *counters) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        base = seed
    elif seed is None:
        base = np.random.SeedSequence()
    else:
        base = np.random.SeedSequence(int(seed))
    key = tuple(base.spawn_key) + tuple(int(c) for c in counters)
    return np.random.SeedSequence(base.entropy, spawn_key=key)


def generator(seed, *counters) -> np.random.Generator:
    return np.random.default_rng(as_seed_sequence(seed, *counters))


def seed_record(seed) -> str:
    """Printable identity of a seed or substream."""
    ss = as_seed_sequence(seed)
    if ss.spawn_key:
        return f"{ss.entropy}:{'.'.join(map(str, ss.spawn_key))}"
    return str(ss.entropy)
