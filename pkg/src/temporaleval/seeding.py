"""Deterministic sub-seed derivation.

Every seeded component derives its RNG from (seed, purpose tags) through a
cryptographic hash so that results are reproducible across platforms and
independent of Python's salted hash().
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, *tags: object) -> int:
    text = "|".join([str(int(seed))] + [str(t) for t in tags])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(seed: int, *tags: object) -> random.Random:
    return random.Random(derive_seed(seed, *tags))
