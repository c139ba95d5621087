"""Deterministic random-stream derivation.

Every stochastic step in the package draws from a counter-based Philox
generator keyed by hashing a root seed together with a string path such as
``("trainprep", case_id, z)``.  Philox output is specified bit-for-bit by
numpy independently of platform, so any plan or sample produced here is
reproducible across machines, and streams for distinct paths are independent,
which makes per-case parallelism equal to sequential execution.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_key(seed: int, *path) -> int:
    """128-bit Philox key from BLAKE2b of ``seed`` and a derivation path."""
    tag = str(int(seed)) + "".join("/" + str(p) for p in path)
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def derive_rng(seed: int, *path) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *path)``."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *path)))
