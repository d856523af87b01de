"""Blind deconvolution by spectral initialization and regularized Wirtinger descent.

Model: ``y = (B h) o conj(A x) + e`` with ``B`` (d x K) known columns of the unitary
DFT and ``A`` (d x N) known.  Writing ``b_l^* = B[l]`` and ``a_l = conj(A[l])``, the
measurements are linear in the lifted matrix ``Z = h x^*``:

    A(Z)_l = b_l^* Z a_l,        A^*(z) = sum_l z_l b_l a_l^* = B^H diag(z) A.

The solver minimizes ``F(u, v) + G(u, v)`` where ``F = ||A(u v^*) - y||^2`` and ``G``
penalizes leaving the norm / incoherence neighbourhoods of the truth.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _csv
from .errors import DivergenceError, SolverError
from .rng import complex_normal, make_rng

__all__ = [
    "LiftedModel",
    "PlantedTruth",
    "SolverConfig",
    "SolverState",
    "ConditionReport",
    "partial_dft_basis",
    "random_instance",
    "lift_apply",
    "lift_adjoint",
    "default_mu_bound",
    "project_infnorm",
    "spectral_init",
    "objective",
    "wirtinger_gradients",
    "solve",
    "lifted_error",
    "perturb_in_basin",
    "check_key_conditions",
    "write_history",
]


@dataclass
class LiftedModel:
    B: np.ndarray
    A: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=np.complex128)
        self.A = np.asarray(self.A, dtype=np.complex128)
        self.y = np.asarray(self.y, dtype=np.complex128)
        if self.B.ndim != 2 or self.A.ndim != 2 or self.y.ndim != 1:
            raise ValueError("B and A must be matrices and y a vector")
        d = self.y.size
        if self.B.shape[0] != d or self.A.shape[0] != d:
            raise ValueError(
                f"row mismatch: B {self.B.shape}, A {self.A.shape}, y has {d} entries"
            )

    @property
    def d(self):
        return self.y.size

    @property
    def K(self):
        return self.B.shape[1]

    @property
    def N(self):
        return self.A.shape[1]

    def frame_defects(self):
        """``(||B^* B - I||_max, max_l | ||b_l||^2 - K/d |)``; both vanish for partial DFTs."""
        gram = self.B.conj().T @ self.B
        ortho = float(np.max(np.abs(gram - np.eye(self.K))))
        rows = np.sum(np.abs(self.B) ** 2, axis=1)
        return ortho, float(np.max(np.abs(rows - self.K / self.d)))


@dataclass
class PlantedTruth:
    h0: np.ndarray
    x0: np.ndarray
    e: np.ndarray

    @property
    def Z0(self):
        return np.outer(self.h0, np.conj(self.x0))

    @property
    def L0(self):
        return float(np.linalg.norm(self.h0) * np.linalg.norm(self.x0))


@dataclass
class SolverConfig:
    """Descent settings; ``None`` fields are derived from the spectral estimate ``L_hat``.

    Defaults: ``eta = 1 / (2 L_hat)``, ``rho = 1.1 L_hat^2``, ``mu_bound`` from
    :func:`default_mu_bound`.  With ``backtrack`` the step is halved whenever the
    objective would increase and grown by ``step_growth`` after each accepted step.
    """

    eta: float | None = None
    max_iters: int = 1000
    tol: float = 1e-9
    rho: float | None = None
    mu_bound: float | None = None
    backtrack: bool = True
    step_growth: float = 1.5
    record_history: bool = True


@dataclass
class SolverState:
    u: np.ndarray
    v: np.ndarray
    L_hat: float
    rho: float
    mu_bound: float
    eta: float
    t: int = 0
    history: list = field(default_factory=list)
    converged: bool = False

    def lifted(self):
        return np.outer(self.u, np.conj(self.v))


@dataclass
class ConditionReport:
    """Empirical probes of the four local conditions behind the convergence theory.

    Ratios are ``None`` where they are undefined (e.g. at the truth itself).
    """

    rip_ratio: float | None
    noise_adjoint_norm: float
    noise_bound: float
    regularity_ratio: float | None
    regularity_omega: float
    smoothness: float

    @property
    def rip_ok(self):
        return self.rip_ratio is None or 0.75 <= self.rip_ratio <= 1.25

    @property
    def robustness_ok(self):
        return self.noise_adjoint_norm <= self.noise_bound

    @property
    def regularity_ok(self):
        return self.regularity_ratio is None or self.regularity_ratio >= self.regularity_omega


def partial_dft_basis(d, columns):
    """Columns of the unitary DFT ``F / sqrt(d)`` at the given indices (taken mod d)."""
    cols = np.asarray(columns, dtype=int) % d
    n = np.arange(d)[:, None]
    return np.exp(-2j * np.pi * ((n * cols[None, :]) % d) / d) / math.sqrt(d)


def random_instance(d, K, N, rng, snr_db=math.inf):
    """Planted problem with Gaussian subspace ``C``; ``A = conj(F C) / sqrt(d)``.

    ``E[a_l a_l^*] = I_N`` under this scaling.  Noise ``e`` is circular complex
    Gaussian with ``||A(h0 x0^*)||^2 / ||e||^2 = 10^(snr_db / 10)``.
    """
    rng = make_rng(rng)
    B = partial_dft_basis(d, np.arange(K))
    C = complex_normal(rng, (d, N))
    A = np.conj(np.fft.fft(C, axis=0)) / math.sqrt(d)
    h0 = complex_normal(rng, K)
    x0 = complex_normal(rng, N)
    clean = (B @ h0) * np.conj(A @ x0)
    e = np.zeros(d, dtype=np.complex128)
    if not math.isinf(snr_db):
        g = complex_normal(rng, d)
        e = g * np.linalg.norm(clean) / (np.linalg.norm(g) * 10.0 ** (snr_db / 20.0))
    return LiftedModel(B=B, A=A, y=clean + e), PlantedTruth(h0=h0, x0=x0, e=e)


def lift_apply(model, Z):
    Z = np.asarray(Z, dtype=np.complex128)
    if Z.shape != (model.K, model.N):
        raise ValueError(f"expected a {(model.K, model.N)} matrix, got {Z.shape}")
    return np.sum((model.B @ Z) * np.conj(model.A), axis=1)


def lift_adjoint(model, z):
    z = np.asarray(z, dtype=np.complex128)
    if z.shape != (model.d,):
        raise ValueError(f"expected a length-{model.d} vector, got {z.shape}")
    return model.B.conj().T @ (z[:, None] * model.A)


def default_mu_bound(d, K):
    return 6.0 * math.sqrt(K * math.log(max(d, 2)) / d)


def project_infnorm(z0, B, cap, tol=1e-12, max_iter=20000):
    """Euclidean projection of ``z0`` onto ``{z : max_l |(B z)_l| <= cap}``.

    Solved by ADMM on the splitting ``w = B z``; the ``w`` step is a phase-preserving
    modulus clip.
    """
    z0 = np.asarray(z0, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    if not cap > 0:
        raise ValueError("cap must be positive")
    if math.isinf(cap) or np.max(np.abs(B @ z0)) <= cap:
        return z0.copy()

    def clip(w):
        mod = np.abs(w)
        return np.where(mod > cap, w * (cap / np.where(mod > 0, mod, 1.0)), w)

    rho = 1.0
    system = np.eye(B.shape[1]) + rho * (B.conj().T @ B)
    z = z0.copy()
    w = clip(B @ z)
    lam = np.zeros_like(w)
    scale = max(np.linalg.norm(z0), cap)
    for _ in range(max_iter):
        z = np.linalg.solve(system, z0 + rho * (B.conj().T @ (w - lam)))
        Bz = B @ z
        w_prev = w
        w = clip(Bz + lam)
        lam = lam + Bz - w
        primal = np.linalg.norm(Bz - w)
        dual = rho * np.linalg.norm(B.conj().T @ (w - w_prev))
        if primal <= tol * scale and dual <= tol * scale:
            break
    return z


def spectral_init(model, mu_bound=None):
    """Leading singular triple of ``A^*(y)``, then the incoherence projection of ``u``.

    ``L_hat`` is the leading singular value and stands in for ``||h0|| ||x0||``.
    """
    M = lift_adjoint(model, model.y)
    if not np.any(M):
        raise SolverError("A^*(y) is zero; nothing to initialize from")
    U, s, Vh = np.linalg.svd(M)
    L_hat = float(s[0])
    mu = default_mu_bound(model.d, model.K) if mu_bound is None else float(mu_bound)
    cap = 2.0 * math.sqrt(L_hat) * mu / math.sqrt(model.d)
    u0 = project_infnorm(math.sqrt(L_hat) * U[:, 0], model.B, cap)
    v0 = math.sqrt(L_hat) * np.conj(Vh[0])
    return SolverState(
        u=u0, v=v0, L_hat=L_hat, rho=1.1 * L_hat**2, mu_bound=mu, eta=1.0 / (2.0 * L_hat)
    )


def _g0(z):
    return np.maximum(z - 1.0, 0.0) ** 2


def _g0_prime(z):
    return 2.0 * np.maximum(z - 1.0, 0.0)


def _residual(model, u, v):
    return (model.B @ u) * np.conj(model.A @ v) - model.y


def _penalty(model, u, v, L, rho, mu):
    Bu = model.B @ u
    inc = model.d * np.abs(Bu) ** 2 / (8.0 * L * mu**2)
    return rho * (
        _g0(np.vdot(u, u).real / (2 * L)) + _g0(np.vdot(v, v).real / (2 * L)) + np.sum(_g0(inc))
    )


def objective(model, state, u=None, v=None):
    """``(F, G)`` at ``(u, v)`` (defaults to the state's iterate)."""
    u = state.u if u is None else u
    v = state.v if v is None else v
    r = _residual(model, u, v)
    F = float(np.vdot(r, r).real)
    G = float(_penalty(model, u, v, state.L_hat, state.rho, state.mu_bound))
    return F, G


def _gradients(model, u, v, L, rho, mu, r=None):
    if r is None:
        r = _residual(model, u, v)
    Bu = model.B @ u
    Av = model.A @ v
    grad_u = model.B.conj().T @ (r * Av)
    grad_v = model.A.conj().T @ (np.conj(r) * Bu)
    # penalty: d/d(conj u) of G0(|u|^2 / 2L) is G0'(.) u / 2L
    grad_u = grad_u + rho * _g0_prime(np.vdot(u, u).real / (2 * L)) / (2 * L) * u
    grad_v = grad_v + rho * _g0_prime(np.vdot(v, v).real / (2 * L)) / (2 * L) * v
    inc = model.d * np.abs(Bu) ** 2 / (8.0 * L * mu**2)
    weights = _g0_prime(inc)
    if np.any(weights):
        grad_u = grad_u + rho * model.d / (8.0 * L * mu**2) * (model.B.conj().T @ (weights * Bu))
    return grad_u, grad_v


def wirtinger_gradients(state, model):
    """Gradients of ``F + G`` with respect to ``conj(u)`` and ``conj(v)``."""
    return _gradients(model, state.u, state.v, state.L_hat, state.rho, state.mu_bound)


def lifted_error(u, v, truth):
    """``||u v^* - h0 x0^*||_F / ||h0 x0^*||_F`` without forming either matrix."""
    nu, nv = np.vdot(u, u).real, np.vdot(v, v).real
    nh, nx = np.vdot(truth.h0, truth.h0).real, np.vdot(truth.x0, truth.x0).real
    cross = (np.vdot(u, truth.h0) * np.vdot(truth.x0, v)).real
    return math.sqrt(max(nu * nv + nh * nx - 2 * cross, 0.0) / (nh * nx))


def solve(model, cfg=None, state=None, truth=None):
    """Run regularized Wirtinger gradient descent from ``state`` (spectral init if None).

    Stops when the relative iterate change drops below ``cfg.tol`` or after
    ``cfg.max_iters`` steps.  Raises :class:`DivergenceError` if the objective exceeds
    ``1e6`` times its initial value or becomes non-finite.
    """
    cfg = cfg or SolverConfig()
    if state is None:
        state = spectral_init(model, cfg.mu_bound)
    if cfg.rho is not None:
        state.rho = float(cfg.rho)
    if cfg.mu_bound is not None:
        state.mu_bound = float(cfg.mu_bound)
    if cfg.eta is not None:
        state.eta = float(cfg.eta)
    if state.eta < 0:
        raise ValueError("step size must be non-negative")

    L, rho, mu = state.L_hat, state.rho, state.mu_bound
    u, v = state.u.copy(), state.v.copy()
    r = _residual(model, u, v)
    F = float(np.vdot(r, r).real)
    G = float(_penalty(model, u, v, L, rho, mu))
    start = F + G
    eta = state.eta

    def record(t, F, G):
        if cfg.record_history:
            err = lifted_error(u, v, truth) if truth is not None else None
            state.history.append((t, F, G, err))

    if not state.history:
        record(state.t, F, G)
    for _ in range(cfg.max_iters):
        gu, gv = _gradients(model, u, v, L, rho, mu, r)
        for _halving in range(64):
            un, vn = u - eta * gu, v - eta * gv
            rn = _residual(model, un, vn)
            Fn = float(np.vdot(rn, rn).real)
            Gn = float(_penalty(model, un, vn, L, rho, mu))
            if not cfg.backtrack or Fn + Gn <= F + G:
                break
            eta *= 0.5
        else:
            un, vn, rn, Fn, Gn = u, v, r, F, G
        if not math.isfinite(Fn + Gn) or Fn + Gn > 1e6 * max(start, np.finfo(float).tiny):
            raise DivergenceError(f"objective reached {Fn + Gn:.3e} at iteration {state.t + 1}")
        step = math.sqrt(np.vdot(un - u, un - u).real + np.vdot(vn - v, vn - v).real)
        size = math.sqrt(np.vdot(un, un).real + np.vdot(vn, vn).real)
        u, v, r, F, G = un, vn, rn, Fn, Gn
        state.t += 1
        record(state.t, F, G)
        if cfg.backtrack:
            eta *= cfg.step_growth
        if step <= cfg.tol * max(size, np.finfo(float).tiny):
            state.converged = True
            break

    state.u, state.v, state.eta = u, v, eta
    return state


def perturb_in_basin(truth, eps, rng):
    """Random ``(u, v)`` with ``||u v^* - h0 x0^*||_F <= eps * L0`` (balanced norms)."""
    rng = make_rng(rng)
    h0, x0 = truth.h0, truth.x0
    scale = math.sqrt(truth.L0)
    hb = h0 * scale / np.linalg.norm(h0)
    xb = x0 * scale / np.linalg.norm(x0)
    dh = complex_normal(rng, h0.size)
    dx = complex_normal(rng, x0.size)
    # first-order error is ||dh|| ||xb|| + ||hb|| ||dx|| ~ 2 s L0; keep it under eps L0
    s = eps / 3.0
    u = hb + s * scale * dh / np.linalg.norm(dh)
    v = xb + s * scale * dx / np.linalg.norm(dx)
    return u, v


def check_key_conditions(model, state, truth=None, rng=0, n_segments=8, eps=1.0 / 15.0):
    """Numeric report on local RIP, noise robustness, regularity and smoothness.

    Diagnostic only: needs the planted truth and refuses to run without it.
    """
    if truth is None:
        raise SolverError("key-condition diagnostics need the planted truth")
    rng = make_rng(rng)
    L, rho, mu = state.L_hat, state.rho, state.mu_bound
    u, v = state.u, state.v
    D = np.outer(u, np.conj(v)) - truth.Z0
    dn = np.linalg.norm(D) ** 2
    rip = float(np.linalg.norm(lift_apply(model, D)) ** 2 / dn) if dn > 0 else None

    L0 = truth.L0
    adj = float(np.linalg.norm(lift_adjoint(model, truth.e), 2))
    bound = eps * L0 / (10.0 * math.sqrt(2.0))

    gu, gv = _gradients(model, u, v, L, rho, mu)
    F, G = objective(model, state)
    c = float(np.vdot(truth.e, truth.e).real) + 1700.0 * adj**2
    excess = max(F + G - c, 0.0)
    grad_sq = float(np.vdot(gu, gu).real + np.vdot(gv, gv).real)
    regularity = grad_sq / excess if excess > 0 else None

    smooth = 0.0
    size = math.sqrt(np.vdot(u, u).real + np.vdot(v, v).real)
    for _ in range(n_segments):
        du = complex_normal(rng, u.size)
        dv = complex_normal(rng, v.size)
        norm = math.sqrt(np.vdot(du, du).real + np.vdot(dv, dv).real)
        du, dv = du * (0.1 * size / norm), dv * (0.1 * size / norm)
        for t in (0.25, 0.5, 1.0):
            hu, hv = _gradients(model, u + t * du, v + t * dv, L, rho, mu)
            diff = math.sqrt(np.linalg.norm(hu - gu) ** 2 + np.linalg.norm(hv - gv) ** 2)
            smooth = max(smooth, diff / (t * 0.1 * size))
    return ConditionReport(
        rip_ratio=rip,
        noise_adjoint_norm=adj,
        noise_bound=bound,
        regularity_ratio=regularity,
        regularity_omega=L0 / 5000.0,
        smoothness=smooth,
    )


def write_history(path, state, meta=None):
    meta = {"kind": "solver_history", "L_hat": state.L_hat, "rho": state.rho,
            "mu_bound": state.mu_bound, **(meta or {})}
    _csv.write_table(path, meta, ["iter", "F", "G", "lifted_error"], state.history)
