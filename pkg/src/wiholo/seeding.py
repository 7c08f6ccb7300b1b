"""Deterministic seed derivation.

Every random draw in a run descends from one master seed. Stage seeds are
derived by hashing the master seed together with a stage label and an
index, so any single stage (one scan position, one channel's noise) can
be reproduced in isolation and parallel execution order cannot matter.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, stage: str, index: int = 0) -> int:
    """64-bit child seed for (master, stage, index), stable across platforms."""
    digest = hashlib.sha256(f"{master_seed}:{stage}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master_seed: int, stage: str, index: int = 0) -> np.random.Generator:
    """Generator seeded from :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(master_seed, stage, index))
