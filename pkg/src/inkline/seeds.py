"""Deterministic per-sample seed derivation.

Every randomized pipeline stage derives one RNG per sample from
``(global_seed, sample_id)``, so shard order, worker count, and
processing order cannot change outputs.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(global_seed: int, sample_id: str) -> int:
    """Hash a global seed and a sample id into a 64-bit stream seed."""
    digest = hashlib.sha256(f"{global_seed}\x1f{sample_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(global_seed: int, sample_id: str) -> np.random.Generator:
    """Seeded generator for one sample; independent of all other samples."""
    return np.random.default_rng(derive_seed(global_seed, sample_id))
