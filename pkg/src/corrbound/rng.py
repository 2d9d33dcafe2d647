"""Counter-based per-stream seeding.

A stream's generator depends only on (master seed, stream index), so samples
can be drawn in any order or in parallel and still reproduce exactly.
"""

from __future__ import annotations

import os

import numpy as np

DEFAULT_SEED = 0xC0FFEE
SEED_ENV = "CORRBOUND_SEED"
_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def stream_seed(seed: int, stream: int) -> int:
    return splitmix64(splitmix64(seed & _MASK) ^ (stream & _MASK))


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(seed, stream)))


def default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    if value is None or value == "":
        return DEFAULT_SEED
    return int(value, 0)
