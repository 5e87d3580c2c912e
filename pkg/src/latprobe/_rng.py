"""Seeded, splittable random streams.

All randomness in the package flows through Philox counter-based generators
keyed by a SeedSequence. Substreams are derived by extending the spawn key,
so stream i never depends on how many sibling streams exist or on the order
in which they are consumed.
"""

from __future__ import annotations

import numpy as np

Seed = "int | np.random.SeedSequence"


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def substream_seq(seed, *key: int) -> np.random.SeedSequence:
    """SeedSequence for the child stream identified by ``key``."""
    base = as_seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=base.entropy, spawn_key=tuple(base.spawn_key) + tuple(int(k) for k in key)
    )


def stream(seed, *key: int) -> np.random.Generator:
    """Philox generator for (seed, key). Same arguments, same numbers, always."""
    return np.random.Generator(np.random.Philox(substream_seq(seed, *key)))
