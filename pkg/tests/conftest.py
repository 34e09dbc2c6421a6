import numpy as np
import pytest

from stabmor.datasets import load_fixture, random_stable_system, scalar_system


@pytest.fixture(scope="session")
def spring50():
    return load_fixture("spring50")


@pytest.fixture(scope="session")
def spring200():
    return load_fixture("spring200")


@pytest.fixture(scope="session")
def rlc():
    return load_fixture("rlc_ladder")


@pytest.fixture
def scalar():
    return scalar_system(1.0)


@pytest.fixture(scope="session")
def small_systems():
    return [random_stable_system(10, seed=s) for s in range(5)]


def dense_transfer(sys, s):
    E, A, B, C = (M.toarray() for M in (sys.E, sys.A, sys.B, sys.C))
    return C @ np.linalg.inv(s * E - A) @ B
