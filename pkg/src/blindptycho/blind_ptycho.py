"""Blind ptychography: specimen and mask from a spectrogram when neither is known.

Each transformed column ``T[:, k]`` of the spectrogram is a circular convolution of
the specimen autocorrelation ``g_k = x o S_k conj(x)`` with the mask autocorrelation
``f_k = rev(m) o S_{-k} conj(rev(m))``.  With ``x = C x'`` the specimen factor lies in
the known subspace spanned by ``face_split(C, S_k conj(C))`` with coefficients
``vec(x' x'^*)``, and ``f_k`` is supported on a window of ``delta`` entries, so each
column is a blind deconvolution.  Solving one per shift gives ``2 delta - 1``
specimen estimates; dividing them back out gives mask estimates; the pair whose
re-synthesized spectrogram best matches ``Y`` is selected.
"""

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _csv
from .angular_sync import rank_one_sync
from .blind_deconv import LiftedModel, SolverConfig, partial_dft_basis, solve
from .errors import (
    BlindPtychoError,
    DegenerateEstimateError,
    DivisionError,
    SolverError,
)
from .measurement import MeasurementMatrix, PtychoScene, _columns
from .rng import complex_normal, make_rng
from .signal_ops import as_vector, face_split
from .wdd import EPS_DIV, lhs_transform

__all__ = [
    "BlindScene",
    "ShiftEstimates",
    "MaskSupportWarning",
    "random_blind_scene",
    "shift_order",
    "blur_support",
    "build_shift_instance",
    "recover_specimen_shift",
    "recover_specimen_zero_shift",
    "recover_mask",
    "fix_scale",
    "measurement_residual",
    "recover_multi_shift",
    "relative_error",
    "save_shift_estimates",
]

RANK_ONE_MIN_FRACTION = 0.5
OFF_SUPPORT_WARN = 0.1


class MaskSupportWarning(UserWarning):
    """A recovered mask autocorrelation carries noticeable mass off its support."""


@dataclass(frozen=True)
class BlindScene:
    """Specimen ``x = C x'`` in a known subspace and a mask supported on ``[0, delta)``."""

    C: np.ndarray
    x_prime: np.ndarray
    m: np.ndarray
    delta: int

    def __post_init__(self):
        C = np.asarray(self.C, dtype=np.complex128)
        xp = as_vector(self.x_prime, "x_prime")
        if C.ndim != 2 or C.shape[1] != xp.size:
            raise ValueError(f"C has shape {C.shape}; expected (d, {xp.size})")
        if C.shape[1] > C.shape[0] // 4:
            raise ValueError(f"subspace dimension N={C.shape[1]} exceeds d/4 for d={C.shape[0]}")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "x_prime", xp)
        # PtychoScene owns the support and non-zero checks
        base = PtychoScene(x=C @ xp, m=self.m, delta=self.delta)
        object.__setattr__(self, "m", base.m)
        object.__setattr__(self, "delta", base.delta)

    @property
    def x(self):
        return self.C @ self.x_prime

    @property
    def d(self):
        return self.C.shape[0]

    @property
    def N(self):
        return self.C.shape[1]

    @property
    def m_norm(self):
        return float(np.linalg.norm(self.m))

    def scene(self):
        return PtychoScene(x=self.x, m=self.m, delta=self.delta)


@dataclass
class ShiftEstimates:
    """Per-shift estimates, residual grid and the selected pair.

    ``x_est[i]`` / ``m_est[j]`` are ``None`` for shifts whose reconstruction failed
    (reason in ``failures``); the matching residual rows/columns are ``inf``.
    ``residuals[i, j]`` is the relative squared Frobenius misfit of ``(x_est[i], m_est[j])``.
    """

    shifts: list
    x_est: list
    m_est: list
    residuals: np.ndarray
    chosen: tuple
    failures: dict = field(default_factory=dict)

    @property
    def x_chosen(self):
        return self.x_est[self.chosen[0]]

    @property
    def m_chosen(self):
        return self.m_est[self.chosen[1]]

    @property
    def chosen_residual(self):
        return float(self.residuals[self.chosen])


def random_blind_scene(d, delta, N, rng):
    """Gaussian subspace, coefficients and mask (all unit-variance circular complex)."""
    rng = make_rng(rng)
    C = complex_normal(rng, (d, N))
    xp = complex_normal(rng, N)
    m = np.zeros(d, dtype=np.complex128)
    m[:delta] = complex_normal(rng, delta)
    return BlindScene(C=C, x_prime=xp, m=m, delta=delta)


def shift_order(delta):
    """``0, 1, ..., delta-1, -(delta-1), ..., -1``; index 0 is the zero shift."""
    delta = int(delta)
    return list(range(delta)) + list(range(-(delta - 1), 0))


def blur_support(d, delta):
    """Indices ``{0, -1, ..., -(delta-1)} mod d`` carrying ``f_k`` for every admissible k."""
    return (-np.arange(int(delta))) % d


def _normalize_shift(k, d, delta):
    k = int(k)
    if not -d < k < d:
        raise ValueError(f"shift {k} outside (-d, d) for d={d}")
    if k > d // 2:
        k -= d
    elif k < -(d // 2):
        k += d
    if abs(k) > delta - 1:
        raise ValueError(f"shift {k} outside the admissible band |k| <= {delta - 1}")
    return k


def _full_matrix(Y):
    Y = Y.Y if isinstance(Y, MeasurementMatrix) else np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise ValueError(f"blind recovery needs a full d x d spectrogram, got {Y.shape}")
    return Y


def _instance(T, C, delta, k):
    d = T.shape[0]
    sqrt_d = math.sqrt(d)
    lifted_C = face_split(C, np.roll(np.conj(C), k, axis=0))
    A = np.conj(np.fft.fft(lifted_C, axis=0)) / sqrt_d
    B = partial_dft_basis(d, blur_support(d, delta))
    # calibrated against the noiseless forward model: y = (B h) o conj(A conj(x''))
    y = np.fft.fft(T[:, k % d]) / d**2
    return LiftedModel(B=B, A=A, y=y)


def build_shift_instance(Y, C, delta, k):
    """Blind-deconvolution instance for shift ``k`` (``|k| <= delta - 1``, mod d).

    The blur is ``h_j = f_k[-j mod d]`` for ``j < delta`` and the signal is
    ``conj(vec(x' x'^*))`` (row-major).
    """
    Y = _full_matrix(Y)
    d = Y.shape[0]
    k = _normalize_shift(k, d, int(delta))
    C = np.asarray(C, dtype=np.complex128)
    if C.ndim != 2 or C.shape[0] != d:
        raise ValueError(f"C must have {d} rows")
    return _instance(lhs_transform(Y), C, int(delta), k)


def _specimen_from_solution(state, C, k, m_norm):
    N = C.shape[1]
    lifted = np.conj(state.v)
    if k == 0 and m_norm is not None:
        # (B h)_0 = ||m||^2 / sqrt(d) pins the scale of the zero-shift product
        d = C.shape[0]
        lead = complex(np.sum(state.u)) / math.sqrt(d)
        if lead == 0:
            raise DegenerateEstimateError("zero-shift blur estimate has vanishing mean")
        lifted = lifted * (lead * math.sqrt(d) / m_norm**2)
    xp, fraction = rank_one_sync(lifted.reshape(N, N))
    if fraction < RANK_ONE_MIN_FRACTION:
        raise DegenerateEstimateError(
            f"shift {k}: lifted estimate is far from rank one (fraction {fraction:.3f})"
        )
    return C @ xp


def recover_specimen_shift(Y, C, delta, k, cfg=None, m_norm=None, _T=None):
    """Specimen estimate from the shift-``k`` blind deconvolution.

    The magnitude is only meaningful for ``k = 0`` with ``m_norm`` supplied; other
    shifts are rescaled later together with their mask estimate.
    """
    Y = _full_matrix(Y)
    d = Y.shape[0]
    k = _normalize_shift(k, d, int(delta))
    C = np.asarray(C, dtype=np.complex128)
    T = lhs_transform(Y) if _T is None else _T
    model = _instance(T, C, int(delta), k)
    cfg = cfg or SolverConfig(record_history=False)
    state = solve(model, cfg)
    return _specimen_from_solution(state, C, k, m_norm)


def recover_specimen_zero_shift(Y, C, delta, m_norm, cfg=None):
    """Specimen up to global phase from the zero-shift column alone."""
    if not m_norm > 0:
        raise ValueError("m_norm must be positive")
    return recover_specimen_shift(Y, C, delta, 0, cfg, m_norm)


def recover_mask(Y, x_est, delta, _T=None):
    """Mask (supported on ``[0, delta)``, up to global phase) given a specimen estimate.

    Dividing ``dft(T[:, k])`` by ``d * dft(x_est o S_k conj(x_est))`` yields ``f_k``,
    whose entry ``-j`` is ``m_j conj(m_{j-k})``.  Those entries fill the ``delta x delta``
    Gram matrix of the mask support, which is factored by rank-one synchronization.
    """
    Y = _full_matrix(Y)
    d = Y.shape[0]
    delta = int(delta)
    x_est = as_vector(x_est, "x_est")
    if x_est.size != d:
        raise ValueError(f"x_est has length {x_est.size}, expected {d}")
    T = lhs_transform(Y) if _T is None else _T
    j = np.arange(delta)
    gram = np.zeros((delta, delta), dtype=np.complex128)
    off_mass = 0.0
    total_mass = 0.0
    for k in range(-(delta - 1), delta):
        g_hat = np.fft.fft(x_est * np.conj(np.roll(x_est, k)))
        mod = np.abs(g_hat)
        if not mod.max() > 0 or mod.min() <= EPS_DIV * mod.max():
            raise DivisionError(f"specimen autocorrelation spectrum vanishes at shift {k}")
        f_k = np.fft.ifft(np.fft.fft(T[:, k % d]) / (d * g_hat))
        rows = j[(j - k >= 0) & (j - k < delta)]
        on = (-rows) % d
        gram[rows, rows - k] = f_k[on]
        energy = np.abs(f_k) ** 2
        total_mass += float(energy.sum())
        off_mass += float(energy.sum() - energy[on].sum())
    if total_mass > 0 and off_mass > OFF_SUPPORT_WARN * total_mass:
        warnings.warn(
            f"{off_mass / total_mass:.1%} of the mask autocorrelation energy lies off its support",
            MaskSupportWarning,
            stacklevel=2,
        )
    m_supp, _ = rank_one_sync(gram)
    m = np.zeros(d, dtype=np.complex128)
    m[:delta] = m_supp
    return m


def fix_scale(x_est, m_est, m_norm):
    """Rescale so ``||m_est|| == m_norm``; the specimen absorbs the reciprocal factor."""
    if not m_norm > 0:
        raise ValueError("m_norm must be positive")
    x_est = np.asarray(x_est, dtype=np.complex128)
    m_est = np.asarray(m_est, dtype=np.complex128)
    norm = float(np.linalg.norm(m_est))
    if norm == 0:
        raise DegenerateEstimateError("mask estimate is identically zero")
    alpha = norm / m_norm
    return alpha * x_est, m_est / alpha


def measurement_residual(Y, x_est, m_est):
    """``||Y(x_est, m_est) - Y||_F^2 / ||Y||_F^2``."""
    Y = _full_matrix(Y)
    d = Y.shape[0]
    scene = PtychoScene(x=x_est, m=m_est, delta=d)
    Y_est = _columns(scene, np.arange(d))
    return float(np.linalg.norm(Y_est - Y) ** 2 / np.linalg.norm(Y) ** 2)


def recover_multi_shift(Y, C, delta, m_norm, cfg=None):
    """All per-shift specimen/mask estimates, their residual grid, and the best pair.

    Shifts whose reconstruction raises are recorded in ``failures`` and excluded.
    Ties in the residual grid go to the lowest flat index.
    """
    if not m_norm > 0:
        raise ValueError("m_norm must be positive")
    Y = _full_matrix(Y)
    if not np.linalg.norm(Y) > 0:
        raise SolverError("measurements are identically zero")
    C = np.asarray(C, dtype=np.complex128)
    delta = int(delta)
    cfg = cfg or SolverConfig(record_history=False)
    T = lhs_transform(Y)
    shifts = shift_order(delta)
    xs, ms, failures = [], [], {}
    for k in shifts:
        try:
            x_k = recover_specimen_shift(Y, C, delta, k, cfg, m_norm, _T=T)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", MaskSupportWarning)
                m_k = recover_mask(Y, x_k, delta, _T=T)
            x_k, m_k = fix_scale(x_k, m_k, m_norm)
        except (BlindPtychoError, np.linalg.LinAlgError) as exc:
            failures[k] = f"{type(exc).__name__}: {exc}"
            x_k = m_k = None
        xs.append(x_k)
        ms.append(m_k)
    if len(failures) == len(shifts):
        raise SolverError(f"every shift failed: {failures}")

    n = len(shifts)
    residuals = np.full((n, n), np.inf)
    for i in range(n):
        if xs[i] is None:
            continue
        for j in range(n):
            if ms[j] is not None:
                residuals[i, j] = measurement_residual(Y, xs[i], ms[j])
    flat = int(np.argmin(residuals))
    chosen = (flat // n, flat % n)
    return ShiftEstimates(
        shifts=shifts, x_est=xs, m_est=ms, residuals=residuals, chosen=chosen, failures=failures
    )


def relative_error(a, b):
    """Phase-aligned ``min_theta ||b - e^{i theta} a|| / ||b||``."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    nb = np.linalg.norm(b)
    if nb == 0:
        raise ValueError("reference vector is zero")
    c = np.vdot(a, b)
    phase = c / abs(c) if abs(c) > 0 else 1.0
    return float(np.linalg.norm(b - phase * a) / nb)


def save_shift_estimates(out_dir, est, meta=None):
    """Write ``estimates.csv`` (one row per entry) and ``residuals.csv`` (the grid)."""
    os.makedirs(out_dir, exist_ok=True)
    info = {"chosen_i": est.chosen[0], "chosen_j": est.chosen[1],
            "chosen_shift_x": est.shifts[est.chosen[0]],
            "chosen_shift_m": est.shifts[est.chosen[1]],
            "failed_shifts": " ".join(str(k) for k in sorted(est.failures)), **(meta or {})}
    rows = []
    for tag, vectors in (("x", est.x_est), ("m", est.m_est)):
        for k, vec in zip(est.shifts, vectors):
            if vec is None:
                continue
            rows.extend((tag, k, n, float(z.real), float(z.imag)) for n, z in enumerate(vec))
    _csv.write_table(os.path.join(out_dir, "estimates.csv"), {"kind": "shift_estimates", **info},
                     ["vector", "shift", "index", "re", "im"], rows)
    _csv.write_table(os.path.join(out_dir, "residuals.csv"), {"kind": "residual_grid", **info},
                     ["shift_x", *[f"m{k}" for k in est.shifts]],
                     [(k, *map(float, row)) for k, row in zip(est.shifts, est.residuals)])
