"""Full-order and reduced descriptor systems, transfer functions and H2 metrics.

A system ``E x' = A x + B u, y = C x`` is stored either sparsely
(:class:`SparseSystem`, the full-order model) or densely
(:class:`ReducedModel`). Both expose the transfer function
``H(s) = C (sE - A)^{-1} B``, evaluated by factorisation, never by inversion.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .exceptions import (DimensionMismatch, PoleProximity, RankDeficient,
                         SingularMatrix, SingularPencil, UnstableSystem,
                         ZeroDenominator)
from .linalg import DENSE_LIMIT, as_sparse, generalized_eigenvalues, lu_factor
from .parallel import ordered_map

__all__ = [
    "SparseSystem", "ReducedModel", "FrequencyGrid", "StabilityRecord",
    "StabilityReport", "transfer_eval", "frequency_response",
    "spectral_abscissa", "is_asymptotically_stable", "h2_norm",
    "relative_h2_error", "reduce_with_pair", "MARGINAL_TOL",
]

# spectral abscissae at or above -MARGINAL_TOL count as a loss of stability
MARGINAL_TOL = 1e-12
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Sparse LTI descriptor system ``(E, A, B, C)``.

    Build instances with :meth:`from_matrices`, which validates shapes,
    checks that the pencil is regular and classifies the system as ``"ode"``
    (factorisable ``E``) or ``"dae"``.
    """

    E: sp.csc_array
    A: sp.csc_array
    B: sp.csc_array
    C: sp.csc_array
    kind: str = "unknown"
    name: str = ""

    @classmethod
    def from_matrices(cls, E, A, B, C, kind=None, name="", check_regular=True):
        E, A, B, C = (as_sparse(M) for M in (E, A, B, C))
        n = A.shape[0]
        if A.shape != (n, n) or E.shape != (n, n):
            raise DimensionMismatch(f"E {E.shape} and A {A.shape} must be square and equal")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C has {C.shape[1]} columns, expected {n}")
        if check_regular:
            _check_regular(E, A)
        detected = _classify(E)
        if kind is None or kind == "unknown":
            kind = detected
        elif kind == "ode" and detected != "ode":
            raise SingularMatrix("system declared as ODE but E cannot be factorised")
        elif kind not in ("ode", "dae"):
            raise ValueError(f"unknown system kind {kind!r}")
        return cls(E, A, B, C, kind, name)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def n_in(self):
        return self.B.shape[1]

    @property
    def n_out(self):
        return self.C.shape[0]

    def transfer(self, s):
        return transfer_eval(self, s)

    def densify(self):
        """The same system as a :class:`ReducedModel` (test-scale only)."""
        return ReducedModel(self.E.toarray(), self.A.toarray(), self.B.toarray(),
                            self.C.toarray(), {"method": "dense-copy", "name": self.name})

    def __repr__(self):
        return (f"<SparseSystem {self.name or ''} n={self.n} n_in={self.n_in} "
                f"n_out={self.n_out} kind={self.kind}>")


def _check_regular(E, A, samples=3):
    rng = np.random.default_rng(20240101)
    last = None
    for _ in range(samples):
        lam = complex(rng.standard_normal(), rng.standard_normal())
        try:
            lu_factor(lam * E - A)
            return
        except SingularMatrix as exc:
            last = exc
    raise SingularPencil(f"lambda E - A singular at all sampled lambda ({last})")


def _classify(E):
    if E.nnz == 0:
        return "dae"
    try:
        lu_factor(E)
    except SingularMatrix:
        return "dae"
    return "ode"


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Dense reduced system ``(Ebar, Abar, Bbar, Cbar)`` of order ``r``."""

    Ebar: np.ndarray
    Abar: np.ndarray
    Bbar: np.ndarray
    Cbar: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        r = self.Abar.shape[0]
        if self.Abar.shape != (r, r) or self.Ebar.shape != (r, r):
            raise DimensionMismatch("Abar and Ebar must be square of equal size")
        if self.Bbar.shape[0] != r or self.Cbar.shape[1] != r:
            raise DimensionMismatch("Bbar/Cbar not conformable with Abar")
        for name in ("Ebar", "Abar", "Bbar", "Cbar"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def r(self):
        return self.Abar.shape[0]

    n = r

    @property
    def n_in(self):
        return self.Bbar.shape[1]

    @property
    def n_out(self):
        return self.Cbar.shape[0]

    def transfer(self, s):
        return transfer_eval(self, s)


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Strictly increasing real frequencies ``omega >= 0``."""

    omegas: np.ndarray
    spacing: str = "logarithmic"

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("a frequency grid needs at least two points")
        if np.any(np.diff(w) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if w[0] < 0:
            raise ValueError("frequencies must be non-negative")
        if self.spacing == "logarithmic" and w[0] <= 0:
            raise ValueError("logarithmic grids must be strictly positive")
        object.__setattr__(self, "omegas", w)

    @classmethod
    def logspace(cls, lo=1e-4, hi=1e4, num=2000):
        return cls(np.logspace(np.log10(lo), np.log10(hi), num), "logarithmic")

    @classmethod
    def linspace(cls, lo, hi, num):
        return cls(np.linspace(lo, hi, num), "linear")

    @classmethod
    def default(cls):
        return cls.logspace(1e-4, 1e4, 2000)

    def __len__(self):
        return self.omegas.size


@dataclass
class StabilityRecord:
    r: int
    spectral_abscissa: float
    stable: bool
    rel_h2_error: float = float("nan")
    failure: str = ""


@dataclass
class StabilityReport:
    """Per-dimension stability verdicts of a family of reduced models."""

    records: list
    method: str = "plain"
    scheme: str = ""
    nodes: int = 0
    node_evals: int = 0
    iterations: int = 0

    @property
    def stable_count(self):
        return sum(rec.stable for rec in self.records)

    @property
    def unstable_r(self):
        return [rec.r for rec in self.records if not rec.stable]

    @property
    def all_stable(self):
        return all(rec.stable for rec in self.records)

    def __len__(self):
        return len(self.records)


def _dense_factor(M):
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrix
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M, check_finite=False)
    scale = np.max(np.abs(M)) if M.size else 0.0
    if scale == 0.0 or np.min(np.abs(np.diag(lu))) < 1e-14 * scale:
        raise SingularMatrix("dense factorisation met a zero pivot")
    return lu, piv


def transfer_eval(sys, s):
    """Evaluate ``H(s) = C (sE - A)^{-1} B`` as an (n_out, n_in) complex array.

    Raises
    ------
    PoleProximity
        If ``sE - A`` is numerically singular.
    """
    s = complex(s)
    if isinstance(sys, ReducedModel):
        try:
            lu = _dense_factor(s * sys.Ebar - sys.Abar)
        except SingularMatrix as exc:
            raise PoleProximity(f"s = {s} is a pole of the reduced model ({exc})") from None
        return sys.Cbar @ sla.lu_solve(lu, sys.Bbar.astype(complex))
    try:
        F = lu_factor(s * sys.E - sys.A)
    except SingularMatrix as exc:
        raise PoleProximity(f"s = {s} is (close to) a pole ({exc})") from None
    X = F.solve(sys.B.toarray())
    return np.asarray(sys.C @ X, dtype=complex).reshape(sys.n_out, sys.n_in)


def frequency_response(sys, omegas, chunk=512):
    """``H(i omega)`` for every omega, stacked as (len(omegas), n_out, n_in)."""
    omegas = np.asarray(omegas, dtype=float)
    if isinstance(sys, ReducedModel):
        out = np.empty((omegas.size, sys.n_out, sys.n_in), dtype=complex)
        B = sys.Bbar.astype(complex)
        for start in range(0, omegas.size, chunk):
            w = omegas[start:start + chunk]
            pencils = 1j * w[:, None, None] * sys.Ebar - sys.Abar
            try:
                X = np.linalg.solve(pencils, np.broadcast_to(B, (w.size,) + B.shape))
            except np.linalg.LinAlgError:
                # fall back to point-wise evaluation to locate the offending frequency
                X = None
            if X is None or not np.all(np.isfinite(X)):
                out[start:start + w.size] = [transfer_eval(sys, 1j * x) for x in w]
            else:
                out[start:start + w.size] = sys.Cbar @ X
        return out
    values = ordered_map(lambda x: transfer_eval(sys, 1j * x), omegas)
    return np.asarray(values, dtype=complex).reshape(omegas.size, sys.n_out, sys.n_in)


def spectral_abscissa(model, dense_limit=DENSE_LIMIT):
    """Largest real part of the finite eigenvalues of the pencil ``(E, A)``.

    Reduced models always go through QZ so an ill-conditioned ``Ebar`` is
    never inverted. Returns ``-inf`` if the pencil has no finite eigenvalues.
    """
    if isinstance(model, ReducedModel):
        A, E = model.Abar, model.Ebar
    else:
        if model.n > dense_limit:
            raise DimensionMismatch(
                f"system dimension {model.n} exceeds the dense limit {dense_limit}")
        A, E = model.A.toarray(), model.E.toarray()
    finite, _ = generalized_eigenvalues(A, E, dense_limit=dense_limit)
    if finite.size == 0:
        return -np.inf
    return float(np.max(finite.real))


def is_asymptotically_stable(model, dense_limit=DENSE_LIMIT):
    """True iff every finite pencil eigenvalue has strictly negative real part.

    Eigenvalues on the imaginary axis (within ``MARGINAL_TOL``) count as
    unstable.
    """
    return spectral_abscissa(model, dense_limit) < -MARGINAL_TOL


def _h2_from_samples(H, grid):
    sq = np.sum(np.abs(H) ** 2, axis=(1, 2))
    # symmetric in omega: (1/2pi) * 2 * int_0^inf
    return float(np.sqrt(np.trapezoid(sq, grid.omegas) / np.pi))


def _require_stable(model):
    if isinstance(model, ReducedModel) and not is_asymptotically_stable(model):
        raise UnstableSystem("H2 norm undefined: reduced model is not asymptotically stable")


def h2_norm(sys, grid=None):
    """Trapezoidal approximation of the H2 norm on a frequency grid.

    Parameters
    ----------
    sys : SparseSystem or ReducedModel
        Reduced models are checked for asymptotic stability; full-order
        models are assumed stable.
    grid : FrequencyGrid, optional
        Defaults to 2000 logarithmically spaced points on [1e-4, 1e4].
    """
    grid = FrequencyGrid.default() if grid is None else grid
    _require_stable(sys)
    return _h2_from_samples(frequency_response(sys, grid.omegas), grid)


def relative_h2_error(fom, rom, grid=None, fom_response=None):
    """``||H_fom - H_rom||_H2 / ||H_fom||_H2`` on a shared grid.

    ``fom_response`` may carry precomputed ``frequency_response(fom, grid.omegas)``
    samples, which saves the full-order solves when many ROMs are compared.
    """
    grid = FrequencyGrid.default() if grid is None else grid
    _require_stable(fom)
    _require_stable(rom)
    Hf = frequency_response(fom, grid.omegas) if fom_response is None else fom_response
    Hr = frequency_response(rom, grid.omegas)
    if Hf.shape != Hr.shape:
        raise DimensionMismatch(f"transfer shapes differ: {Hf.shape[1:]} vs {Hr.shape[1:]}")
    denom = _h2_from_samples(Hf, grid)
    if denom < 1e-300:
        raise ZeroDenominator("H2 norm of the full-order model vanishes")
    return _h2_from_samples(Hf - Hr, grid) / denom


def _check_full_rank(M, name):
    if M.shape[1] == 0:
        raise RankDeficient(f"{name} has no columns")
    R = np.linalg.qr(M, mode="r")
    d = np.abs(np.diag(R))
    if d.min() <= RANK_TOL * d.max():
        raise RankDeficient(f"{name} is rank deficient (min |R_ii| / max = {d.min() / d.max():.2e})")


def reduce_with_pair(sys, V, W, method="petrov-galerkin", **provenance):
    """Project a sparse system with ``Abar = W^T A V``, ``Bbar = W^T B``,
    ``Cbar = C V``, ``Ebar = W^T E V``.

    Raises
    ------
    RankDeficient
        If ``V`` or ``W`` does not have full column rank.
    """
    V = np.asarray(V)
    W = np.asarray(W)
    if V.ndim == 1:
        V = V[:, None]
    if W.ndim == 1:
        W = W[:, None]
    if V.shape != W.shape or V.shape[0] != sys.n:
        raise DimensionMismatch(f"V {V.shape} and W {W.shape} must both be ({sys.n}, r)")
    if V.shape[1] > sys.n:
        raise DimensionMismatch("reduced dimension exceeds the full dimension")
    _check_full_rank(V, "V")
    _check_full_rank(W, "W")
    Wt = W.T
    Ebar = Wt @ (sys.E @ V)
    Abar = Wt @ (sys.A @ V)
    Bbar = Wt @ sys.B.toarray()
    Cbar = np.asarray(sys.C @ V)
    prov = {"method": method, "r": V.shape[1], "source": sys.name}
    prov.update(provenance)
    return ReducedModel(Ebar, Abar, Bbar, Cbar, prov)
