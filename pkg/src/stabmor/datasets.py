"""Test systems: random stable pencils, a damped mass-spring chain and an RLC ladder.

The shipped Matrix Market fixtures under ``stabmor/data`` were written by
``tools/generate_fixtures.py`` from the generators in this module.
"""

from importlib import resources

import numpy as np
import scipy.sparse as sp

from .system import SparseSystem

__all__ = [
    "random_stable_system", "spring_chain", "rlc_ladder", "scalar_system",
    "proper_dae", "fixture_path", "load_fixture", "FIXTURES",
]

FIXTURES = ("spring50", "spring200", "rlc_ladder")


def random_stable_system(n, seed=0, density=0.2, mass="diagonal", symmetric=False,
                         n_in=1, n_out=1, margin=(0.2, 1.0)):
    """Random sparse ODE system whose pencil has spectral abscissa in ``-margin``.

    ``mass`` is ``"identity"`` or ``"diagonal"`` (positive entries in
    [0.5, 2]). With ``symmetric=True`` the matrix ``A`` is symmetric.
    """
    rng = np.random.default_rng(seed)
    R = sp.random(n, n, density=density, random_state=rng,
                  data_rvs=rng.standard_normal).toarray()
    if symmetric:
        R = 0.5 * (R + R.T)
    d = np.ones(n) if mass == "identity" else rng.uniform(0.5, 2.0, n)
    if symmetric:
        d = np.ones(n)
    shift = np.linalg.eigvals(R / d[:, None]).real.max() + rng.uniform(*margin)
    A = R - shift * np.diag(d)
    B = rng.standard_normal((n, n_in))
    C = rng.standard_normal((n_out, n))
    return SparseSystem.from_matrices(sp.diags(d), sp.csc_array(A), B, C,
                                      name=f"random{n}-{seed}")


def spring_chain(masses=100, seed=0, mass_damping=0.05, stiffness_damping=0.01,
                 output="first"):
    """Damped mass-spring chain in first-order form, ``n = 2 * masses``.

    ``E = diag(I, M)``, ``A = [[0, I], [-K, -D]]`` with Rayleigh damping
    ``D = a M + b K``. The pencil is stable but ``A + A^T`` is indefinite, so
    plain Galerkin models easily lose stability. The input is a force on the
    first mass; ``output`` selects the displacement of the ``"first"``
    (collocated) or ``"last"`` mass. The transfer to the far end of a long
    chain is tiny at real frequencies, which makes relative errors there
    meaningless, so the collocated output is the default.
    """
    rng = np.random.default_rng(seed)
    m = masses
    k = rng.uniform(0.5, 1.5, m + 1)
    K = sp.diags([k[:-1] + k[1:], -k[1:-1], -k[1:-1]], [0, 1, -1])
    Mm = sp.diags(rng.uniform(0.5, 2.0, m))
    D = mass_damping * Mm + stiffness_damping * K
    I = sp.eye(m)
    E = sp.block_diag([I, Mm])
    A = sp.bmat([[None, I], [-K, -D]])
    B = np.zeros((2 * m, 1))
    B[m, 0] = 1.0
    C = np.zeros((1, 2 * m))
    if output not in ("first", "last"):
        raise ValueError(f"output must be 'first' or 'last', got {output!r}")
    C[0, 0 if output == "first" else m - 1] = 1.0
    return SparseSystem.from_matrices(E, A, B, C, name=f"spring{2 * m}")


def rlc_ladder(sections=10, seed=0, spread=0.15):
    """Index-1 RLC low-pass ladder as a descriptor system, ``n = 3 * sections``.

    Each section has a resistive node (shunt conductance only, hence an
    algebraic equation), a series inductor and a capacitive node. Sections
    are joined by series resistors. The source is a voltage ``u`` behind a
    resistor feeding the first node; the output is the voltage at the final
    capacitive node, so the transfer function is strictly proper. Element
    values vary uniformly by ``spread`` around 1.
    """
    rng = np.random.default_rng(seed)
    val = lambda: 1.0 + spread * rng.uniform(-1.0, 1.0)
    N = sections
    nv = 2 * N  # node voltages: a_k = 2k, c_k = 2k + 1
    n = nv + N
    G = sp.lil_array((nv, nv))
    cap = np.zeros(nv)
    Lval = np.zeros(N)

    def conductance(i, j, g):
        G[i, i] += g
        if j is not None:
            G[j, j] += g
            G[i, j] -= g
            G[j, i] -= g

    g_source = 1.0 / val()
    conductance(0, None, g_source)
    for k in range(N):
        a, c = 2 * k, 2 * k + 1
        conductance(a, None, 0.05 * val())
        cap[c] = val()
        conductance(c, None, 0.01 * val())
        Lval[k] = val()
        if k + 1 < N:
            conductance(c, 2 * (k + 1), 10.0 * val())
    conductance(nv - 1, None, val())  # load
    # inductor k carries current from a_k to c_k
    inc = sp.lil_array((nv, N))
    for k in range(N):
        inc[2 * k, k] = 1.0
        inc[2 * k + 1, k] = -1.0
    E = sp.block_diag([sp.diags(cap), sp.diags(Lval)])
    A = sp.bmat([[-G.tocsc(), -inc.tocsc()], [inc.T.tocsc(), None]])
    B = np.zeros((n, 1))
    B[0, 0] = g_source
    C = np.zeros((1, n))
    C[0, nv - 1] = 1.0
    return SparseSystem.from_matrices(E, A, B, C, name=f"rlc{n}")


def scalar_system(a=1.0):
    """``H(s) = 1 / (s + a)``."""
    return SparseSystem.from_matrices([[1.0]], [[-a]], [[1.0]], [[1.0]], name=f"scalar{a:g}")


def proper_dae():
    """2x2 descriptor system with ``H(s) = 1 / (s + 1) + 1`` (proper, not strictly)."""
    E = np.diag([1.0, 0.0])
    A = -np.eye(2)
    return SparseSystem.from_matrices(E, A, [[1.0], [1.0]], [[1.0, 1.0]], name="proper2")


def fixture_path(name):
    """Path of the manifest of a shipped fixture."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return resources.files("stabmor") / "data" / f"{name}.manifest"


def load_fixture(name):
    from .io import load_manifest, load_system
    manifest = load_manifest(fixture_path(name))
    return load_system(manifest), manifest
