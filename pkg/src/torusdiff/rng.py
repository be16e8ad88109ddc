"""Seedable, splittable random streams.

All randomness in the package flows through counter-based Philox
generators keyed by a master seed plus integer stream keys, so that
replications can run in any order (or in parallel) and still produce
identical output.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under ``master_seed``.

    The same (seed, key) pair always yields the same stream,
    independently of any other stream that was drawn before.
    """
    entropy = (int(master_seed),) + tuple(int(k) for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def label_key(label: str) -> int:
    """Stable integer key for a string label (e.g. a ground-truth id)."""
    return zlib.crc32(label.encode("utf-8"))
