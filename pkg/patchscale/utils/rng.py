"""Seed derivation.

Every random stream in patchscale descends from one integer seed through
`numpy.random.SeedSequence` spawn keys, so any sub-stream (a firm, a
bootstrap, a Monte Carlo table) can be regenerated in isolation.
"""

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def seed_sequence(seed: int, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))


def rng_for(seed: int, *keys) -> np.random.Generator:
    """Generator for the stream identified by `seed` and the spawn path `keys`."""
    return np.random.default_rng(seed_sequence(seed, *keys))


def derive_seed(seed: int, *keys) -> int:
    """Integer child seed, for APIs that take an int rather than a Generator."""
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint32)[0])
