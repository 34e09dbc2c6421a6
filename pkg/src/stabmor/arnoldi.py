"""One-sided (Galerkin) Arnoldi bases for moment matching at an expansion point.

The Krylov space is ``K_r(G, z)`` with ``F = s0 E - A``, ``G = F^{-1} E`` and
``z = F^{-1} B``. ``F`` is factorised once; every Krylov step is one
solve with the cached factors followed by one product with ``E``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import NearSingularCoupling, PoleExpansionPoint, SingularMatrix
from .linalg import lu_factor

__all__ = [
    "ExpansionPoint", "ProjectionPair", "ArnoldiInfo", "arnoldi_basis",
    "multipoint_basis", "biorthogonalize",
]

BREAKDOWN_TOL = 1e-12
COMPLEX_RANK_TOL = 1e-10
COUPLING_COND_MAX = 1e12


@dataclass(frozen=True)
class ExpansionPoint:
    s0: complex

    @property
    def is_real(self):
        return complex(self.s0).imag == 0.0

    @classmethod
    def coerce(cls, pt):
        return pt if isinstance(pt, cls) else cls(complex(pt))


@dataclass(frozen=True, eq=False)
class ProjectionPair:
    """Tall projection matrices ``V`` and ``W`` plus what is known about them."""

    V: np.ndarray
    W: np.ndarray
    orthonormal_V: bool = False
    biorthogonal: bool = False

    @property
    def r(self):
        return self.V.shape[1]


@dataclass
class ArnoldiInfo:
    requested: int
    r_eff: int
    breakdown_step: int = 0
    reason: str = ""
    deflated: int = 0


def _orthogonalize(v, basis):
    # modified Gram-Schmidt, done twice
    for _ in range(2):
        for q in basis:
            v = v - np.vdot(q, v) * q
    return v


def _krylov(sys, s0, r):
    try:
        F = lu_factor(s0 * sys.E - sys.A)
    except SingularMatrix as exc:
        raise PoleExpansionPoint(f"expansion point {s0} is a pole of the pencil ({exc})") from None
    dtype = complex if complex(s0).imag != 0.0 else float
    Z = F.solve(sys.B.toarray().astype(dtype))
    Z = np.asarray(Z, dtype=dtype).reshape(sys.n, -1)

    basis = []
    info = ArnoldiInfo(requested=r, r_eff=0)
    # candidates: the columns of z first, then G applied to accepted vectors in order
    pending = [Z[:, j] for j in range(Z.shape[1])]
    next_to_expand = 0
    while len(basis) < r:
        if pending:
            cand = pending.pop(0)
        elif next_to_expand < len(basis):
            cand = F.solve(sys.E @ basis[next_to_expand]).astype(dtype, copy=False)
            next_to_expand += 1
        else:
            info.breakdown_step = len(basis)
            info.reason = f"invariant subspace reached after {len(basis)} vectors"
            break
        ref = np.linalg.norm(cand)
        if ref == 0.0:
            info.deflated += 1
            continue
        w = _orthogonalize(cand, basis)
        nrm = np.linalg.norm(w)
        if nrm < BREAKDOWN_TOL * ref:
            info.deflated += 1
            continue
        basis.append(w / nrm)
    V = np.column_stack(basis) if basis else np.empty((sys.n, 0), dtype=dtype)
    info.r_eff = V.shape[1]
    return V, info


def _realify(Vc, tol=COMPLEX_RANK_TOL):
    stack = np.hstack([Vc.real, Vc.imag])
    Q, R, _ = sla.qr(stack, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    keep = d > tol * d.max() if d.size else d.astype(bool)
    return Q[:, : int(np.count_nonzero(keep))]


def arnoldi_basis(sys, s0, r, full_output=False):
    """Orthonormal basis of the Krylov space of ``G = F^{-1}E`` and ``F^{-1}B``.

    Parameters
    ----------
    sys : SparseSystem
    s0 : complex or ExpansionPoint
        Expansion point; must not be a pole.
    r : int
        Requested number of (complex) Krylov vectors. Multiple inputs give a
        block Krylov space with the first block ``F^{-1} B``.
    full_output : bool
        Also return an :class:`ArnoldiInfo` describing truncation.

    Returns
    -------
    V : ndarray, shape (n, r_eff)
        Real with orthonormal columns. For a real ``s0`` the bases are nested
        in ``r``. For complex ``s0`` the complex basis is split into real and
        imaginary parts and re-orthogonalised, so ``r_eff`` can reach ``2 r``.
    info : ArnoldiInfo, only if ``full_output``
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    pt = ExpansionPoint.coerce(s0)
    V, info = _krylov(sys, pt.s0 if not pt.is_real else pt.s0.real, r)
    if not pt.is_real:
        V = _realify(V)
        info.r_eff = V.shape[1]
    else:
        V = np.ascontiguousarray(V.real)
    return (V, info) if full_output else V


def multipoint_basis(sys, points, r_each):
    """Concatenate Arnoldi bases for several expansion points and re-orthogonalise."""
    blocks = [arnoldi_basis(sys, s0, r_each) for s0 in points]
    stack = np.hstack(blocks)
    Q, R, _ = sla.qr(stack, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    return Q[:, : int(np.count_nonzero(d > COMPLEX_RANK_TOL * d.max()))]


def biorthogonalize(V, W, cond_max=COUPLING_COND_MAX, return_cond=False):
    """``W' = W (V^T W)^{-1}``, so that ``W'^T V = I``.

    Raises
    ------
    NearSingularCoupling
        If ``cond(V^T W)`` exceeds ``cond_max``.
    """
    V = np.asarray(V)
    W = np.asarray(W)
    K = V.T @ W
    cond = np.linalg.cond(K)
    if not np.isfinite(cond) or cond > cond_max:
        raise NearSingularCoupling(f"cond(V^T W) = {cond:.3e} exceeds {cond_max:.1e}", cond)
    # W' = W K^{-1}  <=>  W'^T = K^{-T} W^T
    Wp = np.linalg.solve(K.T, W.T).T
    return (Wp, cond) if return_cond else Wp
