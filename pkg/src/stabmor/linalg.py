"""Sparse and small dense linear algebra used throughout stabmor.

Sparse matrices are ``scipy.sparse`` CSC arrays. Factorisations are backed
by SuperLU, which computes ``P M Q = L U`` with a fill-reducing column
ordering (COLAMD) and threshold partial pivoting for the rows. A single
factorisation serves both ``M X = R`` and ``M^H X = R`` solves, which is
all the quadrature of the Lyapunov integral needs.

There is deliberately no routine that forms ``S S^H`` and Cholesky-factors
it: squaring the condition number is exactly what we want to avoid.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import (DimensionMismatch, NoConvergence, SingularMatrix,
                         SingularPencil)

__all__ = [
    "as_sparse", "SparseLU", "lu_factor", "lu_solve_multi",
    "dense_eigenvalues", "generalized_eigenvalues", "DENSE_LIMIT",
    "PIVOT_THRESHOLD", "SINGULAR_PIVOT_TOL",
]

DENSE_LIMIT = 2000
PIVOT_THRESHOLD = 0.1
SINGULAR_PIVOT_TOL = 1e-14


def as_sparse(M, dtype=None):
    """Return ``M`` as a canonical CSC array (duplicates summed, sorted indices)."""
    if sp.issparse(M):
        out = sp.csc_array(M, dtype=dtype, copy=True)
    else:
        arr = np.atleast_2d(np.asarray(M, dtype=dtype))
        if arr.ndim != 2:
            raise DimensionMismatch(f"expected a matrix, got shape {arr.shape}")
        out = sp.csc_array(arr)
    out.sum_duplicates()
    out.sort_indices()
    return out


def _permutation_matrix(rows, cols, n):
    return sp.csc_array((np.ones(n), (rows, cols)), shape=(n, n))


class SparseLU:
    """Sparse LU factors with row and column permutations.

    ``P @ M @ Q == L @ U`` where ``L`` is unit lower triangular and ``U`` is
    upper triangular. Instances are read-only and may be shared between
    threads for concurrent solves.

    Do not construct directly; use :func:`lu_factor`.
    """

    __slots__ = ("_lu", "shape", "dtype", "_norm")

    def __init__(self, superlu, shape, dtype, norm):
        self._lu = superlu
        self.shape = shape
        self.dtype = dtype
        self._norm = norm

    @property
    def is_complex(self):
        return np.issubdtype(self.dtype, np.complexfloating)

    @property
    def L(self):
        return self._lu.L

    @property
    def U(self):
        return self._lu.U

    @property
    def P(self):
        n = self.shape[0]
        return _permutation_matrix(self._lu.perm_r, np.arange(n), n)

    @property
    def Q(self):
        n = self.shape[0]
        return _permutation_matrix(np.arange(n), self._lu.perm_c, n)

    @property
    def nnz(self):
        """Stored entries of ``L`` plus ``U`` (the unit diagonal of L counted once)."""
        return self._lu.L.nnz + self._lu.U.nnz

    def solve(self, rhs, mode="normal"):
        return lu_solve_multi(self, rhs, mode)

    def __repr__(self):
        kind = "complex" if self.is_complex else "real"
        return f"<SparseLU {self.shape[0]}x{self.shape[1]} {kind}, nnz(L+U)={self.nnz}>"


def lu_factor(M, pivot_threshold=PIVOT_THRESHOLD, ordering="COLAMD"):
    """Factorise a square sparse matrix.

    Parameters
    ----------
    M : sparse or dense (n, n) matrix, real or complex
    pivot_threshold : float
        Threshold for partial pivoting; 1.0 is classical partial pivoting,
        smaller values favour the diagonal and keep fill down.
    ordering : str
        SuperLU column ordering, ``"COLAMD"`` (approximate minimum degree),
        ``"MMD_AT_PLUS_A"``, ``"MMD_ATA"`` or ``"NATURAL"``.

    Returns
    -------
    SparseLU

    Raises
    ------
    SingularMatrix
        If a zero pivot survives pivoting, or the smallest pivot is below
        ``1e-14 * max|M_ij|``.
    """
    A = as_sparse(M)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"lu_factor needs a square matrix, got {A.shape}")
    if np.iscomplexobj(A.data):
        A = A.astype(np.complex128)
    else:
        A = A.astype(np.float64)
    scale = np.max(np.abs(A.data)) if A.nnz else 0.0
    if scale == 0.0:
        raise SingularMatrix("matrix is identically zero")
    try:
        lu = spla.splu(A, permc_spec=ordering, diag_pivot_thresh=pivot_threshold,
                       options={"SymmetricMode": False})
    except RuntimeError as exc:
        raise SingularMatrix(str(exc)) from None
    pivots = np.abs(lu.U.diagonal())
    if pivots.min() < SINGULAR_PIVOT_TOL * scale:
        raise SingularMatrix(
            f"smallest pivot {pivots.min():.3e} below {SINGULAR_PIVOT_TOL:g} * max|M| "
            f"(max|M| = {scale:.3e})")
    return SparseLU(lu, A.shape, A.dtype, scale)


def lu_solve_multi(F, rhs, mode="normal"):
    """Solve ``M X = RHS`` or ``M^H X = RHS`` with existing factors.

    ``rhs`` may be a vector or an (n, k) block. Real factors with complex
    right-hand sides are handled by splitting into real and imaginary parts.
    """
    if mode not in ("normal", "conjugate-transpose"):
        raise ValueError(f"unknown solve mode {mode!r}")
    b = np.asarray(rhs)
    n = F.shape[0]
    if b.shape[0] != n:
        raise DimensionMismatch(f"right-hand side has {b.shape[0]} rows, system has {n}")
    trans = "N" if mode == "normal" else "H"
    if F.is_complex:
        return F._lu.solve(np.asarray(b, dtype=np.complex128), trans=trans)
    trans = "N" if trans == "N" else "T"
    if np.iscomplexobj(b):
        re = F._lu.solve(np.ascontiguousarray(b.real, dtype=np.float64), trans=trans)
        im = F._lu.solve(np.ascontiguousarray(b.imag, dtype=np.float64), trans=trans)
        return re + 1j * im
    return F._lu.solve(np.asarray(b, dtype=np.float64), trans=trans)


def _check_dense_square(M, name="matrix", dense_limit=DENSE_LIMIT):
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    M = np.atleast_2d(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    if M.shape[0] > dense_limit:
        raise DimensionMismatch(
            f"{name} has dimension {M.shape[0]} above the dense limit {dense_limit}")
    return M


def dense_eigenvalues(M, dense_limit=DENSE_LIMIT):
    """Eigenvalues of a small dense matrix (Hessenberg reduction + shifted QR)."""
    M = _check_dense_square(M, dense_limit=dense_limit)
    if M.size == 0:
        return np.empty(0, dtype=complex)
    try:
        w = sla.eigvals(M, check_finite=True)
    except sla.LinAlgError as exc:
        raise NoConvergence(str(exc)) from None
    return np.asarray(w, dtype=complex)


def _pencil_is_singular(A, E, rng, samples=3):
    n = A.shape[0]
    for _ in range(samples):
        lam = complex(rng.standard_normal(), rng.standard_normal())
        sv = np.linalg.svd(lam * E - A, compute_uv=False)
        if sv[0] == 0.0 or sv[-1] > 100 * n * np.finfo(float).eps * sv[0]:
            return False
    return True


def generalized_eigenvalues(A, E, dense_limit=DENSE_LIMIT, inf_tol=None):
    """Finite eigenvalues of the pencil ``(E, A)`` and the number of infinite ones.

    The eigenvalues solve ``det(lambda E - A) = 0`` and are computed with QZ
    on dense copies.

    Returns
    -------
    finite : ndarray of complex
    n_infinite : int

    Raises
    ------
    SingularPencil
        If ``lambda E - A`` is singular for every sampled ``lambda``.
    """
    A = _check_dense_square(A, "A", dense_limit)
    E = _check_dense_square(E, "E", dense_limit)
    if A.shape != E.shape:
        raise DimensionMismatch(f"A is {A.shape} but E is {E.shape}")
    n = A.shape[0]
    if n == 0:
        return np.empty(0, dtype=complex), 0
    rng = np.random.default_rng(1234)
    if _pencil_is_singular(A, E, rng):
        raise SingularPencil("det(lambda E - A) vanishes for all sampled lambda")
    try:
        ab = sla.eigvals(A, E, homogeneous_eigvals=True)
    except sla.LinAlgError as exc:
        raise NoConvergence(str(exc)) from None
    alpha, beta = ab[0], ab[1]
    if inf_tol is None:
        scale = max(np.linalg.norm(E, 1), np.finfo(float).tiny)
        inf_tol = 10 * n * np.finfo(float).eps * scale
    infinite = np.abs(beta) <= inf_tol
    finite = alpha[~infinite] / beta[~infinite]
    return np.asarray(finite, dtype=complex), int(infinite.sum())
