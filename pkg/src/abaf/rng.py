"""Seeded random streams.

Every random draw in the package flows from one integer run seed through
named streams, so adding a consumer never perturbs the draws of another
("fold3/mel/init" does not care whether "fold3/hsf/init" ran first).
"""

import zlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for (seed, name).

    The name is folded in via crc32 so streams are stable across runs,
    platforms and process boundaries.
    """
    key = zlib.crc32(name.encode("utf8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFF, spawn_key=(key,)))


def child_seed(seed: int, name: str) -> int:
    """Derived integer seed, for APIs that take a seed rather than a stream."""
    return int(stream(seed, name).integers(0, 2**31 - 1))
