"""Forward model: far-field ptychographic spectrograms, noise, and sub-sampling.

``Y[l, k] = |dft(x o shift(m, k))[l]|^2``: row ``l`` is the Fourier mode, column ``k``
the mask shift.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _csv
from .rng import complex_normal, make_rng
from .signal_ops import as_vector

__all__ = [
    "PtychoScene",
    "MeasurementMatrix",
    "random_scene",
    "forward_full",
    "add_noise",
    "forward_subsampled_freq",
    "forward_subsampled_freq_space",
    "save_measurements",
    "load_measurements",
]

_CHUNK = 256


@dataclass(frozen=True)
class PtychoScene:
    """Specimen ``x`` and mask ``m`` with ``supp(m)`` inside ``[0, delta)``."""

    x: np.ndarray
    m: np.ndarray
    delta: int

    def __post_init__(self):
        x = as_vector(self.x, "x")
        m = as_vector(self.m, "m")
        if x.shape != m.shape:
            raise ValueError("specimen and mask must have the same length")
        delta = int(self.delta)
        if not 1 <= delta <= x.size:
            raise ValueError(f"delta={delta} must lie in [1, d={x.size}]")
        if np.any(m[delta:] != 0):
            raise ValueError(f"mask has entries outside its declared support [0, {delta})")
        if not np.linalg.norm(m) > 0:
            raise ValueError("mask must be non-zero")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "delta", delta)

    @property
    def d(self):
        return self.x.size


@dataclass
class MeasurementMatrix:
    """Intensity spectrogram plus the bookkeeping needed to interpret it.

    ``K`` / ``L`` are the numbers of retained Fourier modes / shifts (``d`` when
    fully sampled); ``snr_db`` is ``inf`` for noiseless data.
    """

    Y: np.ndarray
    d: int
    delta: int | None = None
    K: int | None = None
    L: int | None = None
    snr_db: float = math.inf
    seed: int | None = None

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.Y.ndim != 2:
            raise ValueError("measurement matrix must be 2-D")
        if self.K is None:
            self.K = self.Y.shape[0]
        if self.L is None:
            self.L = self.Y.shape[1]
        if self.Y.shape != (self.K, self.L):
            raise ValueError(f"shape {self.Y.shape} does not match (K, L)=({self.K}, {self.L})")
        if self.d % self.K or self.d % self.L:
            raise ValueError(f"K={self.K} and L={self.L} must divide d={self.d}")

    @property
    def is_full(self):
        return self.K == self.d and self.L == self.d

    @property
    def noiseless(self):
        return math.isinf(self.snr_db) and self.snr_db > 0


def random_scene(d, delta, rng, x=None):
    """Complex Gaussian specimen and mask (mask supported on ``[0, delta)``)."""
    rng = make_rng(rng)
    if x is None:
        x = complex_normal(rng, d)
    m = np.zeros(d, dtype=np.complex128)
    m[:delta] = complex_normal(rng, delta)
    return PtychoScene(x=x, m=m, delta=delta)


def _columns(scene, shifts):
    d = scene.d
    n = np.arange(d)[:, None]
    out = np.empty((d, len(shifts)))
    shifts = np.asarray(shifts)
    for start in range(0, len(shifts), _CHUNK):
        ks = shifts[start:start + _CHUNK]
        masks = scene.m[(n - ks[None, :]) % d]
        out[:, start:start + _CHUNK] = np.abs(np.fft.fft(scene.x[:, None] * masks, axis=0)) ** 2
    return out


def forward_full(scene):
    Y = _columns(scene, np.arange(scene.d))
    return MeasurementMatrix(Y=Y, d=scene.d, delta=scene.delta)


def add_noise(meas, snr_db, seed):
    """Add real Gaussian noise whose Frobenius norm realises ``snr_db`` exactly.

    ``10 log10(||Y||_F^2 / ||N||_F^2) == snr_db``.  ``snr_db = +inf`` returns a copy.
    """
    snr_db = float(snr_db)
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    if not meas.noiseless:
        raise ValueError("add_noise expects noiseless measurements")
    Y = meas.Y.copy()
    if not math.isinf(snr_db):
        rng = make_rng(seed)
        G = rng.standard_normal(Y.shape)
        scale = np.linalg.norm(Y) / (np.linalg.norm(G) * 10.0 ** (snr_db / 20.0))
        Y = Y + scale * G
    return MeasurementMatrix(
        Y=Y, d=meas.d, delta=meas.delta, K=meas.K, L=meas.L,
        snr_db=snr_db, seed=None if seed is None else int(seed),
    )


def _check_factor(value, d, name):
    value = int(value)
    if value <= 0 or d % value:
        raise ValueError(f"{name}={value} must be a positive divisor of d={d}")
    return value


def forward_subsampled_freq(scene, K):
    """Rows of the full spectrogram at the ``K`` equally spaced modes ``(d/K) [K]_0``."""
    return forward_subsampled_freq_space(scene, K, scene.d)


def forward_subsampled_freq_space(scene, K, L):
    """``K`` equally spaced Fourier modes at ``L`` equally spaced shifts."""
    d = scene.d
    K = _check_factor(K, d, "K")
    L = _check_factor(L, d, "L")
    cols = _columns(scene, np.arange(0, d, d // L))
    return MeasurementMatrix(Y=cols[:: d // K, :], d=d, delta=scene.delta, K=K, L=L)


def save_measurements(path, meas):
    meta = {
        "kind": "measurement_matrix",
        "d": meas.d,
        "delta": meas.delta,
        "K": meas.K,
        "L": meas.L,
        "snr_db": meas.snr_db,
        "seed": meas.seed,
    }
    _csv.write_table(path, meta, None, meas.Y.tolist())


def load_measurements(path):
    meta, _, rows = _csv.read_table(path, header=False)
    Y = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)

    def _int(key):
        return int(meta[key]) if meta.get(key, "") != "" else None

    return MeasurementMatrix(
        Y=Y, d=int(meta["d"]), delta=_int("delta"), K=_int("K"), L=_int("L"),
        snr_db=float(meta.get("snr_db", "inf")), seed=_int("seed"),
    )
