"""Angular synchronization: a vector, up to global phase, from its Gram diagonals.

The banded solver fills a Hermitian matrix with the unit-modulus phases of the
supplied diagonals and reads the phases off its leading eigenvector; magnitudes
come from the main diagonal.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import SyncError
from .signal_ops import as_vector

__all__ = [
    "BandedDiagonals",
    "SyncProblem",
    "diagonals_of",
    "magnitudes",
    "angular_sync",
    "rank_one_sync",
    "fix_global_phase",
]

EPS_MAG = 1e-10


@dataclass
class BandedDiagonals:
    """Diagonals ``p`` in ``[-(kappa-1), kappa-1]`` of a rank-one Gram matrix ``v v^*``.

    ``diags[p][n]`` estimates ``v[n] * conj(v[n - p])`` (indices mod d).  ``domain_tag``
    records whether ``v`` is the specimen itself (``"spatial"``) or its DFT
    (``"fourier"``).
    """

    diags: dict
    kappa: int
    domain_tag: str = "spatial"

    def __post_init__(self):
        self.kappa = int(self.kappa)
        if self.kappa < 1:
            raise SyncError("kappa must be at least 1")
        if 0 not in self.diags:
            raise SyncError("offset-0 diagonal is required")
        self.diags = {int(p): as_vector(v, f"diag[{p}]") for p, v in self.diags.items()}
        d = self.d
        for p, v in self.diags.items():
            if v.size != d:
                raise SyncError(f"diagonal {p} has length {v.size}, expected {d}")
            if abs(p) > self.kappa - 1:
                raise SyncError(f"offset {p} lies outside the band of half-width {self.kappa}")

    @property
    def d(self):
        return self.diags[0].size

    def hermitian_defect(self):
        """Largest ``|diag(-p)[n-p] - conj(diag(p)[n])|`` over stored pairs, relative to diag 0."""
        worst = 0.0
        for p, v in self.diags.items():
            if p <= 0 or -p not in self.diags:
                continue
            mate = np.roll(self.diags[-p], p)
            worst = max(worst, float(np.max(np.abs(mate - np.conj(v)))))
        scale = float(np.max(np.abs(self.diags[0]))) or 1.0
        return worst / scale


# The problem carries nothing beyond the diagonals themselves.
SyncProblem = BandedDiagonals


def diagonals_of(v, kappa, domain_tag="spatial"):
    """Exact band of ``v v^*`` (test fixtures and synthetic checks)."""
    v = as_vector(v, "v")
    diags = {p: v * np.conj(np.roll(v, p)) for p in range(-(kappa - 1), kappa)}
    return BandedDiagonals(diags=diags, kappa=kappa, domain_tag=domain_tag)


def magnitudes(problem):
    """Entrywise square root of the main diagonal, negative real parts clipped to 0."""
    return np.sqrt(np.clip(problem.diags[0].real, 0.0, None)).astype(np.complex128)


def fix_global_phase(v):
    """Rotate so the largest-magnitude entry is real and positive."""
    v = np.asarray(v, dtype=np.complex128)
    j = int(np.argmax(np.abs(v)))
    if v[j] == 0:
        return v.copy()
    out = v * (np.abs(v[j]) / v[j])
    out[j] = np.abs(v[j])
    return out


def _leading_eigvec(H):
    n = H.shape[0]
    _, vec = linalg.eigh(H, subset_by_index=[n - 1, n - 1])
    return vec[:, 0]


def angular_sync(problem, allow_magnitude_only=False):
    """Recover ``v`` (up to global phase) from banded Gram diagonals.

    With ``kappa == 1`` there is no relative-phase information; this raises unless
    ``allow_magnitude_only`` is set, in which case all phases are 1.
    """
    mags = magnitudes(problem)
    if not np.any(mags > 0):
        raise SyncError("offset-0 diagonal is identically zero")
    d = problem.d
    if problem.kappa < 2 or len(problem.diags) == 1:
        if not allow_magnitude_only:
            raise SyncError("kappa < 2 carries no phase information")
        return fix_global_phase(mags)

    off = [v for p, v in problem.diags.items() if p != 0]
    cutoff = EPS_MAG * max(float(np.max(np.abs(v))) for v in off)
    H = np.zeros((d, d), dtype=np.complex128)
    rows = np.arange(d)
    for p, v in problem.diags.items():
        if p == 0:
            continue
        mod = np.abs(v)
        phase = np.where(mod > cutoff, v / np.where(mod > 0, mod, 1.0), 0.0)
        np.add.at(H, (rows, (rows - p) % d), phase)
    H = 0.5 * (H + H.conj().T)

    lead = _leading_eigvec(H)
    mod = np.abs(lead)
    phases = np.where(mod > EPS_MAG * mod.max(), lead / np.where(mod > 0, mod, 1.0), 1.0)
    return fix_global_phase(mags * phases)


def rank_one_sync(G):
    """Best rank-one factor ``v`` with ``G ~ c v v^*`` for an unknown unimodular ``c``.

    The phase of ``c`` is removed through the trace (``tr(v v^*) > 0``), the
    Hermitian part is taken, and ``v = sqrt(lambda_1) u_1``.  Returns ``(v, fraction)``
    where ``fraction = lambda_1 / sum |lambda_i|`` measures how rank-one ``G`` was.
    """
    G = np.asarray(G, dtype=np.complex128)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("rank_one_sync expects a square matrix")
    tr = np.trace(G)
    if abs(tr) > 0:
        G = G * (np.conj(tr) / abs(tr))
    G = 0.5 * (G + G.conj().T)
    w, vec = np.linalg.eigh(G)
    total = float(np.sum(np.abs(w)))
    lam = float(w[-1])
    if total == 0 or lam <= 0:
        return np.zeros(G.shape[0], dtype=np.complex128), 0.0
    v = np.sqrt(lam) * vec[:, -1]
    return fix_global_phase(v), lam / total
