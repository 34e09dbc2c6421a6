"""Regularisation of stable descriptor systems into stable ODE systems.

The pencil is perturbed to ``E^ = E - alpha A`` and ``A^ = A + beta E`` with
``alpha = beta**2``. For small enough ``beta`` the result is an
asymptotically stable ODE whose transfer function approaches the original
one on compact frequency bands, and in H2 when the descriptor system is
strictly proper. No a-priori bound on ``beta`` is computable, so stability
is checked after the fact.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (NotRegularised, SingularEhat, SingularMatrix,
                         StabmorError)
from .linalg import DENSE_LIMIT, lu_factor
from .system import (FrequencyGrid, SparseSystem, _h2_from_samples,
                     frequency_response, is_asymptotically_stable)

__all__ = [
    "RegularisationConfig", "regularize", "properness_probe", "PropernessReport",
    "RegularisationSweepResult", "SweepEntry", "regularisation_error_sweep",
    "DEFAULT_BETAS", "BETA_FLOOR",
]

DEFAULT_BETAS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
BETA_FLOOR = 1e-10


@dataclass(frozen=True)
class RegularisationConfig:
    beta: float

    def __post_init__(self):
        b = float(self.beta)
        if not 0.0 < b < 1.0:
            raise NotRegularised(f"beta must lie in (0, 1), got {b}")
        if b < BETA_FLOOR:
            raise NotRegularised(f"beta = {b} is below the numerical floor {BETA_FLOOR}")
        object.__setattr__(self, "beta", b)

    @property
    def alpha(self):
        return self.beta * self.beta


def regularize(sys, cfg):
    """Return the ODE system with ``E^ = E - beta^2 A`` and ``A^ = A + beta E``.

    ``cfg`` is a :class:`RegularisationConfig` or a bare ``beta``. The
    combined sparsity pattern of ``s E^ - A^`` equals that of ``s E - A``.

    Raises
    ------
    SingularEhat
        If ``E^`` cannot be factorised, which means the input pencil was not
        stable.
    """
    if not isinstance(cfg, RegularisationConfig):
        cfg = RegularisationConfig(cfg)
    E, A = sys.E, sys.A
    Ehat = (E - cfg.alpha * A).tocsc()
    Ahat = (A + cfg.beta * E).tocsc()
    try:
        lu_factor(Ehat)
    except SingularMatrix as exc:
        raise SingularEhat(f"regularised mass matrix is singular for beta={cfg.beta} ({exc})") from None
    name = f"{sys.name}-reg{cfg.beta:g}" if sys.name else f"reg{cfg.beta:g}"
    return SparseSystem(Ehat, Ahat, sys.B, sys.C, "ode", name)


@dataclass
class PropernessReport:
    """Heuristic verdict from sampling ``||H(i w)||_F`` at high frequencies."""

    trend: str
    slope: float
    omegas: np.ndarray
    norms: np.ndarray

    @property
    def strictly_proper(self):
        return self.trend == "decaying"


def properness_probe(sys, omega_max=1e8, omega_min=None, points=60, decades=2.0):
    """Classify the high-frequency behaviour as decaying, plateau or growing.

    The log-log slope of ``||H(i w)||_F`` over the last ``decades`` decades
    below ``omega_max`` decides: slope < -0.5 is decaying (strictly proper),
    |slope| <= 0.5 a plateau (proper), > 0.5 growing (improper). This is a
    sampling heuristic, not a symbolic decomposition.
    """
    lo = omega_max / 10 ** decades if omega_min is None else omega_min
    omegas = np.logspace(np.log10(lo), np.log10(omega_max), points)
    H = frequency_response(sys, omegas)
    norms = np.sqrt(np.sum(np.abs(H) ** 2, axis=(1, 2)))
    tail = omegas >= omega_max / 10 ** decades
    tiny = np.finfo(float).tiny
    y = np.log10(np.maximum(norms[tail], tiny))
    x = np.log10(omegas[tail])
    if np.all(norms[tail] <= tiny):
        slope = -np.inf
    else:
        slope = float(np.polyfit(x, y, 1)[0])
    if slope < -0.5:
        trend = "decaying"
    elif slope <= 0.5:
        trend = "plateau"
    else:
        trend = "growing"
    return PropernessReport(trend, slope, omegas, norms)


@dataclass
class SweepEntry:
    beta: float
    h2_error: float
    regularised_stable: object  # True/False, or None if not checked
    rom_stable_counts: dict = field(default_factory=dict)
    failure: str = ""


@dataclass
class RegularisationSweepResult:
    entries: list

    @property
    def betas(self):
        return [e.beta for e in self.entries]

    @property
    def errors(self):
        return [e.h2_error for e in self.entries]


def regularisation_error_sweep(dae, betas=DEFAULT_BETAS, grid=None, check_stability=True,
                               dense_limit=DENSE_LIMIT):
    """H2 distance between a descriptor system and its regularisations.

    For each ``beta`` (processed in decreasing order) the system is
    regularised, its stability checked by QZ when ``n <= dense_limit``, and
    ``||H_dae - H_ode||_H2`` approximated with the trapezoidal rule on
    ``grid`` from pointwise transfer differences. Failures are recorded per
    entry and do not stop the sweep.
    """
    grid = FrequencyGrid.default() if grid is None else grid
    Hd = frequency_response(dae, grid.omegas)
    entries = []
    for beta in sorted((float(b) for b in betas), reverse=True):
        try:
            ode = regularize(dae, beta)
            stable = None
            if check_stability and ode.n <= dense_limit:
                stable = is_asymptotically_stable(ode, dense_limit)
            err = _h2_from_samples(Hd - frequency_response(ode, grid.omegas), grid)
            entries.append(SweepEntry(beta, err, stable))
        except StabmorError as exc:
            entries.append(SweepEntry(beta, float("nan"), False,
                                      failure=f"{type(exc).__name__}: {exc}"))
    return RegularisationSweepResult(entries)
