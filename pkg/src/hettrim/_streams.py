"""Deterministic random-stream derivation.

Every stochastic component of the package (fold shuffles, bootstrap
resamples of bagged trees, bootstrap replicates, synthetic-data draws)
pulls from its own counter-based generator whose key is derived by
hashing a root seed together with a path of small integers.  Streams are
therefore independent of execution order and of the number of worker
threads, and two runs with the same seed are bit-for-bit identical.
"""
from __future__ import annotations

import numpy as np

# Namespace constants keep unrelated consumers of the same root seed on
# disjoint stream paths.
NS_FOLDS = 11
NS_EHAT = 12
NS_MU0 = 13
NS_MU1 = 14
NS_M2_0 = 15
NS_M2_1 = 16
NS_TREE = 21
NS_BOOT = 31
NS_DGP = 41
NS_TRIAL = 51

_INV_2_53 = 1.0 / (1 << 53)


def child_seed(seed: int, *path: int) -> int:
    """Derive a stable 64-bit child seed from ``seed`` and an integer path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def stream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator for the stream addressed by ``(seed, *path)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def open_uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws strictly inside (0, 1), suitable for inverse-CDF maps.

    Uses the midpoints (k + 0.5) / 2**53 of a 53-bit integer draw, so the
    result can never be exactly 0.0 or 1.0.
    """
    return (rng.integers(0, 1 << 53, size=size) + 0.5) * _INV_2_53
