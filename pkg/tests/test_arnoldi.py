import numpy as np
import pytest
import scipy.linalg as sla

from stabmor.arnoldi import (ExpansionPoint, arnoldi_basis, biorthogonalize,
                             multipoint_basis)
from stabmor.datasets import random_stable_system
from stabmor.exceptions import NearSingularCoupling, PoleExpansionPoint
from stabmor.system import SparseSystem, reduce_with_pair, transfer_eval


def test_single_column_is_normalised_solution(spring50):
    sys, _ = spring50
    F = 0.7 * sys.E.toarray() - sys.A.toarray()
    z = np.linalg.solve(F, sys.B.toarray()).ravel()
    V = arnoldi_basis(sys, 0.7, 1)
    assert V.shape == (sys.n, 1)
    np.testing.assert_allclose(np.abs(V[:, 0]), np.abs(z) / np.linalg.norm(z), atol=1e-12)


def test_two_dimensional_example():
    sys = SparseSystem.from_matrices(np.eye(2), np.diag([-1.0, -2.0]), [[1.0], [1.0]],
                                     [[1.0, 0.0]])
    V, info = arnoldi_basis(sys, 0.0, 2, full_output=True)
    assert info.r_eff == 2
    np.testing.assert_allclose(V.T @ V, np.eye(2), atol=1e-14)
    # z = (1, 1/2) and G z = (1, 1/4) span R^2
    z = np.array([1.0, 0.5])
    np.testing.assert_allclose(V @ (V.T @ z), z, atol=1e-14)


def test_moment_matching_high_s0(spring50):
    sys, _ = spring50
    V = arnoldi_basis(sys, 100.0, 5)
    m = reduce_with_pair(sys, V, V)
    Hf = transfer_eval(sys, 100.0)
    assert abs(transfer_eval(m, 100.0) - Hf).max() / abs(Hf).max() < 1e-8


def test_orthonormality_over_random_systems():
    for seed in range(50):
        n = 20 + seed % 15
        sys = random_stable_system(n, seed=seed, n_in=1 + seed % 2)
        V = arnoldi_basis(sys, 0.5 + seed % 3, min(10, n))
        assert np.linalg.norm(V.T @ V - np.eye(V.shape[1])) <= 1e-10


def test_nesting_real_s0(spring50):
    sys, _ = spring50
    V = arnoldi_basis(sys, 1.0, 12)
    for r in range(2, 13):
        Vr = arnoldi_basis(sys, 1.0, r)
        prev = arnoldi_basis(sys, 1.0, r - 1)
        angles = sla.subspace_angles(Vr, prev)
        assert angles.max() < 1e-8
        np.testing.assert_allclose(np.abs(Vr.T @ V[:, :r]), np.eye(r), atol=1e-8)


def test_complex_s0_gives_real_basis(spring50):
    sys, _ = spring50
    V, info = arnoldi_basis(sys, 0.5 + 2.0j, 5, full_output=True)
    assert V.dtype == np.float64
    assert 5 <= info.r_eff <= 10 and V.shape[1] == info.r_eff
    np.testing.assert_allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-10)
    # the real basis still matches the moment at the complex point
    m = reduce_with_pair(sys, V, V)
    Hf = transfer_eval(sys, 0.5 + 2.0j)
    assert abs(transfer_eval(m, 0.5 + 2.0j) - Hf).max() / abs(Hf).max() < 1e-8


def test_block_krylov_multi_input():
    sys = random_stable_system(30, seed=3, n_in=3)
    V = arnoldi_basis(sys, 1.0, 9)
    F = sys.E.toarray() - sys.A.toarray()
    Z = np.linalg.solve(F, sys.B.toarray())
    # the first block spans F^{-1} B
    np.testing.assert_allclose(V[:, :3] @ (V[:, :3].T @ Z), Z, atol=1e-10)


def test_breakdown_truncates():
    # invariant subspace of dimension 2: only two distinct modes are reachable
    E = np.eye(4)
    A = np.diag([-1.0, -1.0, -2.0, -2.0])
    B = np.array([[1.0], [0.0], [1.0], [0.0]])
    sys = SparseSystem.from_matrices(E, A, B, np.ones((1, 4)))
    V, info = arnoldi_basis(sys, 0.0, 4, full_output=True)
    assert info.r_eff == 2 and V.shape == (4, 2)
    assert info.reason and info.breakdown_step == 2


def test_pole_expansion_point():
    sys = SparseSystem.from_matrices(np.eye(2), np.diag([-1.0, -2.0]), [[1.0], [1.0]],
                                     [[1.0, 1.0]])
    with pytest.raises(PoleExpansionPoint):
        arnoldi_basis(sys, -1.0, 2)


def test_invalid_r(spring50):
    with pytest.raises(ValueError):
        arnoldi_basis(spring50[0], 1.0, 0)


def test_expansion_point():
    assert ExpansionPoint.coerce(2.0).is_real
    assert not ExpansionPoint(1 + 1j).is_real


def test_multipoint_basis():
    sys = random_stable_system(40, seed=2)
    V = multipoint_basis(sys, [0.5, 5.0], 4)
    assert V.shape[1] == 8
    np.testing.assert_allclose(V.T @ V, np.eye(8), atol=1e-10)
    m = reduce_with_pair(sys, V, V)
    for s0 in (0.5, 5.0):
        Hf = transfer_eval(sys, s0)
        assert abs(transfer_eval(m, s0) - Hf).max() / abs(Hf).max() < 1e-6


def test_biorthogonalize_examples():
    rng = np.random.default_rng(0)
    V, _ = np.linalg.qr(rng.standard_normal((30, 5)))
    np.testing.assert_allclose(biorthogonalize(V, V), V, atol=1e-14)
    np.testing.assert_allclose(biorthogonalize(V, 2 * V), V, atol=1e-14)
    V = rng.standard_normal((30, 5))
    W = rng.standard_normal((30, 5))
    Wp, cond = biorthogonalize(V, W, return_cond=True)
    assert np.linalg.norm(Wp.T @ V - np.eye(5)) < 1e-10
    assert cond >= 1.0


def test_biorthogonalize_near_singular():
    V = np.eye(4)[:, :2]
    W = np.eye(4)[:, 2:]
    with pytest.raises(NearSingularCoupling) as err:
        biorthogonalize(V, W)
    assert err.value.condition is not None
