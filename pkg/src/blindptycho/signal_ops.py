"""Discrete signal operators on C^d with modular (zero-based) indexing.

Conventions used throughout the package:

* ``dft`` is the unnormalized forward transform, ``(dft x)_k = sum_n x_n e^{-2 pi i n k / d}``,
  and ``idft`` carries the ``1/d``.  Hence ``dft(dft(x)) == d * reverse(x)``.
* ``shift(x, k)_n = x_{n-k}``, ``reverse(x)_n = x_{-n}``,
  ``modulate(x, k)_n = x_n e^{2 pi i k n / d}``.
"""

import numpy as np

__all__ = [
    "as_vector",
    "dft",
    "idft",
    "shift",
    "reverse",
    "modulate",
    "hadamard",
    "circ_conv",
    "shifted_product",
    "subsample",
    "kronecker",
    "khatri_rao",
    "face_split",
]


def as_vector(x, name="x"):
    """Coerce to a 1-D complex128 array, rejecting empty or non-finite input."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def _as_matrix(a, name):
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def _same_length(x, y):
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    return x, y


def dft(x):
    return np.fft.fft(as_vector(x))


def idft(x):
    return np.fft.ifft(as_vector(x))


def shift(x, k):
    """Circular shift: ``shift(x, k)[n] == x[(n - k) % d]``."""
    x = as_vector(x)
    return np.roll(x, int(k) % x.size)


def reverse(x):
    """Reversal about the first entry: ``reverse(x)[n] == x[-n % d]``."""
    x = as_vector(x)
    return np.roll(x[::-1], 1)


def modulate(x, k):
    x = as_vector(x)
    d = x.size
    n = np.arange(d)
    return x * np.exp(2j * np.pi * ((int(k) * n) % d) / d)


def hadamard(x, y):
    x, y = _same_length(x, y)
    return x * y


def circ_conv(x, y):
    """Circular convolution ``(x * y)_k = sum_n x_n y_{k-n}``, computed with FFTs."""
    x, y = _same_length(x, y)
    return np.fft.ifft(np.fft.fft(x) * np.fft.fft(y))


def shifted_product(x, k):
    """``x o S_k conj(x)``: the k-th diagonal of the rank-one Gram matrix ``x x^*``.

    Entry ``n`` equals ``x_n conj(x_{n-k})``.
    """
    x = as_vector(x)
    return x * np.conj(shift(x, k))


def subsample(x, s):
    """Keep every ``s``-th entry starting at index 0.  ``s`` must divide ``len(x)``."""
    x = as_vector(x)
    s = int(s)
    if s <= 0 or x.size % s:
        raise ValueError(f"sub-sampling factor {s} does not divide length {x.size}")
    return x[::s].copy()


def kronecker(a, b):
    return np.kron(_as_matrix(a, "A"), _as_matrix(b, "B"))


def khatri_rao(a, b):
    """Column-wise Kronecker product: column j is ``a[:, j] (x) b[:, j]``."""
    a = _as_matrix(a, "A")
    b = _as_matrix(b, "B")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    m, n = a.shape
    p = b.shape[0]
    return np.einsum("in,jn->ijn", a, b).reshape(m * p, n)


def face_split(a, b):
    """Row-wise Kronecker product (transposed Khatri-Rao): row i is ``a[i] (x) b[i]``."""
    a = _as_matrix(a, "A")
    b = _as_matrix(b, "B")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row mismatch: {a.shape[0]} vs {b.shape[0]}")
    m, n = a.shape
    p = b.shape[1]
    return np.einsum("mi,mj->mij", a, b).reshape(m, n * p)
