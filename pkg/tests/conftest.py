import numpy as np
import pytest


def dft_oracle(x):
    """O(d^2) DFT straight from the defining sum."""
    x = np.asarray(x, dtype=complex)
    d = x.size
    n = np.arange(d)
    return np.exp(-2j * np.pi * np.outer(n, n) / d) @ x


def conv_oracle(x, y):
    d = len(x)
    return np.array([sum(x[n] * y[(k - n) % d] for n in range(d)) for k in range(d)])


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def rel(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))


def aligned(a, b):
    """Phase-aligned relative error of ``a`` against reference ``b``."""
    c = np.vdot(a, b)
    ph = c / abs(c) if abs(c) > 0 else 1.0
    return rel(ph * a, b)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
