import numpy as np
import pytest

from lyasynth.dynamics import load_system
from lyasynth.network import MODE_ONES, Lnn, NetworkShape
from lyasynth.translation import make_candidate
from lyasynth.verifier import discover_solver


@pytest.fixture(scope="session")
def solver():
    cfg = discover_solver(timeout_s=30.0)
    if cfg is None:
        pytest.skip("no SMT solver available; run scripts/setup_solver.sh")
    return cfg


@pytest.fixture(scope="session")
def planar_field():
    return load_system("vars: x, y\nx' = -x + x*y\ny' = -y\n")


@pytest.fixture(scope="session")
def linear_field():
    return load_system("vars: x, y\nx' = -x\ny' = -y\n")


@pytest.fixture(scope="session")
def sum_of_squares_candidate(planar_field):
    """V = x^2 + y^2 as an exact candidate for the planar benchmark system."""
    net = Lnn(NetworkShape(2, (2,), (2,)), [np.eye(2)], np.ones(2), MODE_ONES)
    return make_candidate(net, planar_field)


@pytest.fixture(scope="session")
def linear_candidate(linear_field):
    """V = x^2 + y^2 for the linear system; a genuinely valid certificate."""
    net = Lnn(NetworkShape(2, (2,), (2,)), [np.eye(2)], np.ones(2), MODE_ONES)
    return make_candidate(net, linear_field)
