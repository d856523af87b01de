"""Seed handling.  Every stochastic routine takes an explicit seed or Generator.

Child streams are derived from a master seed by ``SeedSequence`` spawn keys, so
trial ``t`` of a sweep can be regenerated in isolation from ``(seed, t)``.
"""

import numpy as np


def make_rng(seed, *key):
    """Generator for ``seed`` and an optional counter path ``key`` (ints)."""
    if isinstance(seed, np.random.Generator):
        if key:
            raise TypeError("cannot derive a keyed stream from an existing Generator")
        return seed
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def derive_seed(seed, *key):
    """Integer seed for the child stream ``key`` of ``seed`` (stable across runs)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def complex_normal(rng, shape):
    """Circular complex Gaussian entries with unit variance ``E|z|^2 = 1``."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
