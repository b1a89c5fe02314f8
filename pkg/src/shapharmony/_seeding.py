"""Deterministic seed derivation.

Every randomized step takes an integer seed. Nested steps derive child seeds
from the parent seed plus a key path, so results never depend on the order in
which independent jobs are executed.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_word(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFF


def derive_seed(seed: int, *keys: int | str) -> int:
    """Hash ``seed`` and ``keys`` into a fresh 32-bit seed."""
    words = [_as_word(seed), int(seed) >> 32 & 0xFFFFFFFF] + [_as_word(k) for k in keys]
    state = np.random.SeedSequence(words).generate_state(1, dtype=np.uint32)
    return int(state[0])


def rng_for(seed: int, *keys: int | str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
