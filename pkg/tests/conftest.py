import numpy as np
import pytest

from jamgraph import BasisSpec, expand, standardize
from jamgraph.simulate import simulate


def make_problem(d=6, n=60, seed=0, degrees=(1, 2, 3), m=None, scheme="cubic"):
    """Standardized simulated data and its orthonormal expansion."""
    m = d if m is None else m
    _, X = simulate(d, min(m, d * (d - 1) // 2), n, scheme, seed)
    X = standardize(X)
    return X, expand(X, BasisSpec(degrees))


@pytest.fixture
def small():
    return make_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
