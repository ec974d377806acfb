"""Seeded generators for reproducible simulations.

Every random draw in the toolkit goes through :func:`generator`. Work that
fans out (one replica set per calibration phase, one training per sweep
point) derives a child seed from the master seed and the task's integer
coordinates, so results do not depend on thread count or completion order::

    child = derive_seed(seed, phase_index, repetition)

The derivation is ``numpy.random.SeedSequence([seed, *keys])`` reduced to a
single 63-bit word, which is stable across numpy versions.
"""
import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for task ``keys`` under master ``seed``."""
    entropy = [int(seed)] + [int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def generator(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator for ``derive_seed(seed, *keys)``, or ``seed`` alone."""
    if keys:
        seed = derive_seed(seed, *keys)
    return np.random.default_rng(int(seed))
