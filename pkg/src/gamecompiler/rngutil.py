"""Seeded randomness plumbing and small statistics helpers.

Every stochastic experiment in this package derives its generators from a
single integer seed through labeled forking, so that a run is reproducible
regardless of how many sub-experiments it contains.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np


def _label_int(label: object) -> int:
    digest = hashlib.blake2b(repr(label).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def labeled_seedseq(seed: int, *labels: object) -> np.random.SeedSequence:
    """Derive a child seed sequence from ``seed`` and a label path."""
    return np.random.SeedSequence([int(seed)] + [_label_int(x) for x in labels])


def labeled_rng(seed: int, *labels: object) -> np.random.Generator:
    """Derive an independent generator from ``seed`` and a label path."""
    return np.random.default_rng(labeled_seedseq(seed, *labels))


def spawn(rng: np.random.Generator) -> np.random.Generator:
    """Fork a child generator off ``rng``, advancing the parent."""
    return np.random.default_rng(rng.integers(0, 2**63, size=4))


def wilson_interval(wins: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (default 95%)."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = wins / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))
