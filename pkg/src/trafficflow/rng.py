"""Seed plumbing: one root seed fans out into independent named streams.

Every random consumer (weight init, epoch shuffling, synthetic traffic, ...)
draws from its own named stream so adding a consumer never perturbs the
others.  Streams are stable across runs and platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(root_seed: int, name: str) -> np.random.Generator:
    """Generator for the named substream of ``root_seed``."""
    if root_seed < 0:
        raise ValueError("root seed must be >= 0")
    salt = int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")
    seq = np.random.SeedSequence(entropy=[root_seed, salt])
    return np.random.Generator(np.random.PCG64(seq))
