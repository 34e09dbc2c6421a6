"""Stability-preserving projection for Galerkin reduction of stable ODE systems.

With ``M`` the solution of ``A^T M E + E^T M A + I = 0``, reducing with the
pair ``(V, W)`` where ``W = M E V`` yields an asymptotically stable reduced
model for *every* orthonormal ``V``. ``M`` is never formed at scale. The
product ``M V'`` with ``V' = E V`` is the frequency integral

    W = (1/pi) Re int_0^inf S(w)^{-H} S(w)^{-1} V' dw,   S(w) = -i w E - A,

mapped to (0, 1) with ``w = x / (1 - x)`` and approximated by a
positive-weight quadrature rule. Positive weights keep the implied ``M~``
symmetric positive definite however coarse the rule is.

Dense helpers (:func:`mtilde_dense`, :func:`lyapunov_dense_oracle`,
:func:`certify_perturbation_bound`) exist for verification at small scale.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .arnoldi import biorthogonalize
from .exceptions import (DimensionMismatch, NotAnODE, SingularAtFrequency,
                         SingularMatrix, StabmorError, UnstablePencil)
from .linalg import lu_factor
from .parallel import ordered_map
from .quadrature import (AdaptiveConfig, MidpointRefinement, QuadratureRule,
                         adaptive_gk15, nested_midpoint_sequence)
from .system import (FrequencyGrid, StabilityRecord, StabilityReport,
                     frequency_response, is_asymptotically_stable,
                     reduce_with_pair, relative_h2_error, spectral_abscissa)

__all__ = [
    "integrand_columns", "omega_of_xi", "substitution_jacobian",
    "transformed_integrand", "StabilizedProjection", "stabilized_projection",
    "mtilde_dense", "lyapunov_dense_oracle", "CertificationResult",
    "certify_perturbation_bound", "stability_sweep", "ORACLE_LIMIT",
]

ORACLE_LIMIT = 400


def integrand_columns(sys, omega, Vprime):
    """``Re[S(w)^{-H} S(w)^{-1} V']`` from one factorisation of ``S(w)``.

    ``S(w) = -i w E - A`` is factorised once; the same factors solve with
    ``S`` and then with ``S^H``.
    """
    S = (-1j * float(omega)) * sys.E - sys.A
    try:
        F = lu_factor(S)
    except SingularMatrix as exc:
        raise SingularAtFrequency(
            f"S(omega) singular at omega = {omega}: pole on the imaginary axis? ({exc})") from None
    X1 = F.solve(Vprime, "normal")
    X2 = F.solve(X1, "conjugate-transpose")
    return np.ascontiguousarray(X2.real)


def omega_of_xi(xi):
    return xi / (1.0 - xi)


def substitution_jacobian(xi):
    """``d omega / d xi`` for ``omega = xi / (1 - xi)``."""
    return 1.0 / (1.0 - xi) ** 2


def transformed_integrand(sys, xi, Vprime):
    """Integrand on (0, 1) after the substitution, Jacobian included (no 1/pi)."""
    return substitution_jacobian(xi) * integrand_columns(sys, omega_of_xi(xi), Vprime)


@dataclass(frozen=True, eq=False)
class StabilizedProjection:
    W_tilde: np.ndarray
    rule: QuadratureRule
    node_evals: int
    certified: bool = False
    error_estimate: float = float("nan")

    @property
    def scheme(self):
        return self.rule.scheme


def _require_ode(sys):
    if sys.kind != "ode":
        raise NotAnODE(
            f"system kind is {sys.kind!r}; the frequency integral needs a non-singular E "
            "(regularise descriptor systems first)")


def _apply_rule(sys, rule, Vprime):
    terms = ordered_map(lambda x: transformed_integrand(sys, x, Vprime), rule.nodes)
    total = np.zeros(Vprime.shape, dtype=float)
    for w, term in zip(rule.weights, terms):
        total += w * term
    return total / np.pi


def stabilized_projection(sys, V, quadrature=None):
    """Approximate ``W = M E V`` by quadrature of the frequency integral.

    Parameters
    ----------
    sys : SparseSystem
        Asymptotically stable, ``kind == "ode"``.
    V : ndarray (n, r)
        Orthonormal projection basis.
    quadrature : QuadratureRule or AdaptiveConfig
        A fixed rule on (0, 1), or settings for adaptive GK15. Defaults to
        ``AdaptiveConfig()`` (tolerances 0.1).

    Returns
    -------
    StabilizedProjection
    """
    _require_ode(sys)
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != sys.n:
        raise DimensionMismatch(f"V has {V.shape[0]} rows, system has {sys.n}")
    Vprime = np.asarray(sys.E @ V, dtype=float)
    quadrature = AdaptiveConfig() if quadrature is None else quadrature
    if isinstance(quadrature, QuadratureRule):
        W = _apply_rule(sys, quadrature, Vprime)
        return StabilizedProjection(W, quadrature, quadrature.K)
    if isinstance(quadrature, AdaptiveConfig):
        value, evals, info = adaptive_gk15(
            lambda x: transformed_integrand(sys, x, Vprime),
            quadrature.abs_tol, quadrature.rel_tol, quadrature.max_intervals,
            full_output=True, breakpoints=quadrature.breakpoints)
        return StabilizedProjection(value / np.pi, info.rule, evals,
                                    error_estimate=info.error_estimate / np.pi)
    raise TypeError(f"unsupported quadrature specification {quadrature!r}")


def mtilde_dense(sys, rule):
    """Dense ``M~ = (1/pi) sum_k g_k J(x_k) Re[S^{-H} S^{-1}]`` (test scale)."""
    _require_ode(sys)
    return _apply_rule(sys, rule, np.eye(sys.n))


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def lyapunov_dense_oracle(E, A, method="bartels-stewart"):
    """Direct solution of ``A^T M E + E^T M A + I = 0``.

    ``method="bartels-stewart"`` reduces to a standard Lyapunov equation for
    ``X = A E^{-1}`` and calls a Schur-based solver; ``method="kronecker"``
    solves the vectorised n^2 system (tiny n only).

    Raises
    ------
    UnstablePencil
        If the computed solution is not positive definite.
    """
    E = _dense(E)
    A = _dense(A)
    n = A.shape[0]
    if A.shape != (n, n) or E.shape != (n, n):
        raise DimensionMismatch("E and A must be square of equal size")
    if n > ORACLE_LIMIT:
        raise DimensionMismatch(f"dense Lyapunov oracle is limited to n <= {ORACLE_LIMIT}")
    if method == "kronecker":
        I = np.eye(n)
        # vec(A^T M E) = (E^T kron A^T) vec(M) with column-major vec
        L = np.kron(E.T, A.T) + np.kron(A.T, E.T)
        M = np.linalg.solve(L, -I.reshape(-1, order="F")).reshape((n, n), order="F")
    elif method == "bartels-stewart":
        Einv = np.linalg.inv(E)
        X = A @ Einv
        if np.linalg.eigvals(X).real.max() >= 0:
            raise UnstablePencil("pencil has an eigenvalue with non-negative real part")
        Q = -(Einv.T @ Einv)
        M = sla.solve_continuous_lyapunov(X.T, Q)
    else:
        raise ValueError(f"unknown method {method!r}")
    M = 0.5 * (M + M.T)
    if np.linalg.eigvalsh(M)[0] <= 0:
        raise UnstablePencil("Lyapunov solution is not positive definite; pencil not stable")
    return M


@dataclass(frozen=True)
class CertificationResult:
    eta: float
    error_norm: float
    satisfied: bool
    norm_tag: str
    relative_error: float
    relative_bound_holds: bool

    @property
    def threshold(self):
        return 1.0 / self.eta


_NORM_ORD = {"one-norm": 1, "inf-norm": np.inf, "spectral": 2}


def certify_perturbation_bound(M_tilde, M_oracle, E, A, norm_tag="inf-norm"):
    """Check ``||M~ - M|| < 1 / (||A^T|| ||E|| + ||A|| ||E^T||)``.

    When the inequality holds, ``M~`` is positive definite and satisfies the
    Lyapunov inequality, so every Galerkin model built from ``M~ E V`` is
    asymptotically stable. ``norm_tag`` is ``"inf-norm"`` (default),
    ``"one-norm"`` or ``"spectral"`` (where the constant is ``2 ||A|| ||E||``).
    """
    if norm_tag not in _NORM_ORD:
        raise ValueError(f"unknown norm {norm_tag!r}")
    ord_ = _NORM_ORD[norm_tag]
    E = _dense(E)
    A = _dense(A)
    Mt = np.asarray(M_tilde, dtype=float)
    Mo = np.asarray(M_oracle, dtype=float)
    nrm = lambda X: float(np.linalg.norm(X, ord_))
    eta = nrm(A.T) * nrm(E) + nrm(A) * nrm(E.T)
    err = nrm(Mt - Mo)
    satisfied = err < 1.0 / eta
    rel = err / nrm(Mo)
    return CertificationResult(eta, err, bool(satisfied), norm_tag, rel,
                               bool(rel < 1.0) if satisfied else True)


def _sweep_once(sys, V, W_full, r_values, method, grid, fom_response):
    records = []
    for r in r_values:
        Vr = V[:, :r]
        try:
            if W_full is None:
                rom = reduce_with_pair(sys, Vr, Vr, method="galerkin")
            else:
                Wr = biorthogonalize(Vr, W_full[:, :r])
                rom = reduce_with_pair(sys, Vr, Wr, method=method)
            alpha = spectral_abscissa(rom)
            stable = is_asymptotically_stable(rom)
        except StabmorError as exc:
            records.append(StabilityRecord(r, float("nan"), False,
                                           failure=f"{type(exc).__name__}: {exc}"))
            continue
        rec = StabilityRecord(r, alpha, stable)
        if grid is not None and stable:
            rec.rel_h2_error = relative_h2_error(sys, rom, grid, fom_response=fom_response)
        records.append(rec)
    return records


def stability_sweep(sys, V, quadrature=None, r_values=None, grid=None):
    """Stability verdicts of reduced models of every dimension ``r``.

    Parameters
    ----------
    sys : SparseSystem
    V : ndarray (n, r_max)
        Nested basis; the model of order ``r`` uses its leading ``r`` columns.
    quadrature : None, QuadratureRule, AdaptiveConfig or MidpointRefinement
        ``None`` gives plain Galerkin models (``W = V``). Otherwise ``W~`` is
        computed once at ``r_max`` and sliced, biorthogonalised and used for
        each ``r``. ``MidpointRefinement`` refines the nested midpoint rule
        until all models are stable or the iteration cap is reached.
    r_values : iterable of int, optional
        Defaults to ``1..r_max``.
    grid : FrequencyGrid, optional
        If given, the relative H2 error of each stable model is recorded.

    Returns
    -------
    StabilityReport
        Failures at individual ``r`` are recorded, never raised.
    """
    V = np.asarray(V, dtype=float)
    r_values = list(range(1, V.shape[1] + 1)) if r_values is None else list(r_values)
    fom_response = frequency_response(sys, grid.omegas) if grid is not None else None

    if quadrature is None:
        records = _sweep_once(sys, V, None, r_values, "galerkin", grid, fom_response)
        return StabilityReport(records, method="plain")

    if isinstance(quadrature, MidpointRefinement):
        evals = 0
        report = None
        for i in range(1, quadrature.max_iterations + 1):
            rule = nested_midpoint_sequence(i)
            proj = stabilized_projection(sys, V, rule)
            evals += proj.node_evals
            records = _sweep_once(sys, V, proj.W_tilde, r_values, "stabilized", grid,
                                  fom_response)
            report = StabilityReport(records, method="stabilized", scheme=rule.scheme,
                                     nodes=rule.K, node_evals=evals, iterations=i)
            if report.all_stable:
                break
        return report

    proj = stabilized_projection(sys, V, quadrature)
    records = _sweep_once(sys, V, proj.W_tilde, r_values, "stabilized", grid, fom_response)
    return StabilityReport(records, method="stabilized", scheme=proj.scheme,
                           nodes=proj.rule.K, node_evals=proj.node_evals, iterations=1)
