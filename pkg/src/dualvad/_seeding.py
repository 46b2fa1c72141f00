"""Schedule-independent seed derivation.

Every random stream is keyed by the user seed plus stable identifiers, so
per-video work can run in any order or in parallel with identical output.
"""

from __future__ import annotations

import hashlib

import numpy as np

U64 = 2**64


def _word(part: int | str) -> int:
    if isinstance(part, str):
        return int.from_bytes(hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest(), "little")
    return int(part) % U64


def derive_seed(seed: int, *parts: int | str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) % U64, *(_word(p) for p in parts)])


def rng_for(seed: int, *parts: int | str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *parts))


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < U64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed
