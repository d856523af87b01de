"""Known-mask Wigner distribution deconvolution.

For ``Y[l, k] = |dft(x o S_k m)[l]|^2`` the transformed matrix ``T = conj(dft_rows(Y))^T``
has columns

    T[:, k] = d * (x o S_k conj(x)) (*) (rev(m) o S_{-k} conj(rev(m)))

so one more DFT turns each column into a pointwise product that can be divided by
the (known) mask factor.  The quotients are the diagonals of ``x x^*``, which
angular synchronization turns back into ``x``.
"""

from dataclasses import dataclass

import numpy as np

from . import _csv
from .angular_sync import BandedDiagonals, angular_sync
from .errors import AliasingError, DivisionError, IllConditionedMaskError
from .measurement import MeasurementMatrix
from .signal_ops import as_vector, reverse

__all__ = [
    "MaskSpectra",
    "lhs_transform",
    "lhs_transform_subsampled",
    "mask_spectra",
    "wdd_divide",
    "wdd_divide_subsampled",
    "wdd_recover",
    "max_autocorrelation_lag",
    "write_mask_diagnostics",
    "EPS_DIV",
]

EPS_DIV = 1e-12


@dataclass
class MaskSpectra:
    """``denom[k] = dft(rev(m) o S_{-k} conj(rev(m)))`` for ``|k| <= kappa - 1``.

    ``mu`` is the smallest modulus over all stored entries, ``max_lag`` the largest
    lag at which the mask autocorrelation is non-zero.
    """

    denom: dict
    mu: float
    kappa: int
    max_lag: int

    @property
    def d(self):
        return self.denom[0].size

    def threshold(self):
        peak = max(float(np.max(np.abs(v))) for v in self.denom.values())
        return EPS_DIV * peak

    def check(self):
        if not self.mu > self.threshold():
            raise IllConditionedMaskError(
                f"mask spectra reach modulus {self.mu:.3e} (threshold {self.threshold():.3e})"
            )


def _matrix(Y):
    return Y.Y if isinstance(Y, MeasurementMatrix) else np.asarray(Y, dtype=np.float64)


def lhs_transform(Y):
    """``conj(F Y)^T`` for a full ``d x d`` spectrogram; see module docstring."""
    Y = _matrix(Y)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise ValueError(f"lhs_transform expects a square matrix, got {Y.shape}")
    return np.conj(np.fft.fft(Y, axis=0)).T


def lhs_transform_subsampled(meas):
    """Aliased transform of a frequency sub-sampled ``K x d`` spectrogram.

    Column ``w`` equals ``sum_r T[:, w - r K]`` where ``T`` is the full transform.
    """
    Y = meas.Y
    d, K = meas.d, meas.K
    if meas.L != d:
        raise AliasingError("shift sub-sampling cannot be undone for a spatially compact mask")
    return (d / K) * np.conj(np.fft.fft(Y, axis=0)).T


def max_autocorrelation_lag(m, rtol=1e-14):
    """Largest circular lag ``j`` (``|j| <= d/2``) at which ``m``'s autocorrelation is non-zero."""
    m = as_vector(m, "m")
    d = m.size
    ac = np.fft.ifft(np.abs(np.fft.fft(m)) ** 2)
    mod = np.abs(ac)
    nz = np.nonzero(mod > rtol * mod.max())[0]
    lags = np.minimum(nz, d - nz)
    return int(lags.max())


def mask_spectra(m, kappa, check=True):
    m = as_vector(m, "m")
    kappa = int(kappa)
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    if not np.linalg.norm(m) > 0:
        raise IllConditionedMaskError("mask is identically zero")
    mr = reverse(m)
    denom = {}
    for k in range(-(kappa - 1), kappa):
        denom[k] = np.fft.fft(mr * np.conj(np.roll(mr, -k)))
    mu = min(float(np.min(np.abs(v))) for v in denom.values())
    spectra = MaskSpectra(denom=denom, mu=mu, kappa=kappa, max_lag=max_autocorrelation_lag(m))
    if check:
        spectra.check()
    return spectra


def wdd_divide(T, spectra, kappa=None):
    """Diagonals ``x o S_k conj(x)`` for ``|k| <= kappa - 1`` from the transformed matrix."""
    kappa = spectra.kappa if kappa is None else int(kappa)
    if kappa > spectra.kappa:
        raise ValueError(f"kappa={kappa} exceeds the {spectra.kappa} offsets in the spectra")
    T = np.asarray(T, dtype=np.complex128)
    d = spectra.d
    limit = spectra.threshold()
    diags = {}
    for k in range(-(kappa - 1), kappa):
        den = spectra.denom[k]
        if np.min(np.abs(den)) <= limit:
            raise DivisionError(f"mask spectrum at offset {k} vanishes")
        diags[k] = np.fft.ifft(np.fft.fft(T[:, k % d]) / (d * den))
    diags[0] = np.clip(diags[0].real, 0.0, None).astype(np.complex128)
    return BandedDiagonals(diags=diags, kappa=kappa)


def wdd_divide_subsampled(T, spectra, K, L, kappa=None):
    """Diagonals from the aliased transform of ``K x L`` sub-sampled data.

    Frequency sub-sampling folds offsets ``w - r K`` together; they separate only
    when ``K > 2 * max_lag``.  Shift sub-sampling (``L < d``) is not invertible for
    a spatially compact mask.
    """
    d = spectra.d
    K, L = int(K), int(L)
    if d % K or d % L:
        raise ValueError(f"K={K} and L={L} must divide d={d}")
    if L != d:
        raise AliasingError(f"L={L} < d={d}: shift sub-sampling aliases every diagonal")
    if K <= 2 * spectra.max_lag:
        raise AliasingError(
            f"K={K} modes cannot separate mask autocorrelation lags up to {spectra.max_lag}"
        )
    kappa = spectra.kappa if kappa is None else int(kappa)
    T = np.asarray(T, dtype=np.complex128)
    if T.shape != (d, K):
        raise ValueError(f"expected a ({d}, {K}) transform, got {T.shape}")
    full = np.zeros((d, d), dtype=np.complex128)
    for k in range(-(kappa - 1), kappa):
        full[:, k % d] = T[:, k % K]
    return wdd_divide(full, spectra, kappa)


def _recover_spatial(meas, m, kappa, allow_magnitude_only):
    spectra = mask_spectra(m, kappa)
    if meas.is_full:
        diags = wdd_divide(lhs_transform(meas.Y), spectra, kappa)
    else:
        T = lhs_transform_subsampled(meas)
        diags = wdd_divide_subsampled(T, spectra, meas.K, meas.L, kappa)
    return angular_sync(diags, allow_magnitude_only=allow_magnitude_only)


def wdd_recover(Y, m, kappa=None, domain="spatial", allow_magnitude_only=False):
    """Estimate the specimen (up to global phase) from a spectrogram and a known mask.

    ``domain="spatial"`` assumes ``m`` is compactly supported; ``domain="fourier"``
    assumes ``dft(m)`` is, and runs the same machinery on the dual spectrogram
    ``d^2 Y^T`` (the spectrogram of ``conj(dft(x))`` under the mask ``dft(conj(m))``).
    ``kappa`` defaults to the number of non-zero autocorrelation lags of the mask.
    """
    meas = Y if isinstance(Y, MeasurementMatrix) else MeasurementMatrix(Y=Y, d=np.shape(Y)[0])
    m = as_vector(m, "m")
    d = meas.d
    if m.size != d:
        raise ValueError(f"mask length {m.size} does not match d={d}")
    if domain == "spatial":
        kappa = max_autocorrelation_lag(m) + 1 if kappa is None else int(kappa)
        return _recover_spatial(meas, m, kappa, allow_magnitude_only)
    if domain == "fourier":
        dual_m = np.fft.fft(np.conj(m))
        kappa = max_autocorrelation_lag(dual_m) + 1 if kappa is None else int(kappa)
        dual = MeasurementMatrix(Y=d * d * meas.Y.T, d=d, K=meas.L, L=meas.K)
        xhat = np.conj(_recover_spatial(dual, dual_m, kappa, allow_magnitude_only))
        return np.fft.ifft(xhat)
    raise ValueError(f"unknown domain {domain!r}")


def write_mask_diagnostics(path, spectra):
    """Per-offset spectral extremes and condition numbers of the mask factors."""
    rows = []
    for k in sorted(spectra.denom):
        mod = np.abs(spectra.denom[k])
        lo, hi = float(mod.min()), float(mod.max())
        rows.append((k, lo, hi, hi / lo if lo > 0 else float("inf")))
    meta = {"kind": "mask_diagnostics", "d": spectra.d, "kappa": spectra.kappa, "mu": spectra.mu}
    _csv.write_table(path, meta, ["offset", "min_modulus", "max_modulus", "condition"], rows)
