import numpy as np
import pytest
from sklearn.linear_model import Lasso

from jamgraph import BasisSpec, CausalOrdering, expand, fit_dag, fit_dag_path, standardize
from jamgraph.dag import dag_kkt_residual, dag_lambda_max, dag_objective, node_lambda_max
from jamgraph.simulate import gen_coeffs, random_dag, sample
from jamgraph.solver import SolverOptions

from conftest import make_problem


def linear_problem(d=8, m=10, n=120, seed=0):
    spec = gen_coeffs(random_dag(d, m, seed, "linear"))
    X = standardize(sample(spec, n))
    return spec, X, expand(X, BasisSpec((1,)))


def lasso_parents(design, X, j, parents, lam):
    """Per-node reference: with r = 1 the group penalty is an l1 penalty of weight lam*sqrt(n)."""
    if len(parents) == 0:
        return set()
    A = design.psi[parents][:, :, 0].T
    model = Lasso(alpha=lam * np.sqrt(design.n), fit_intercept=False, tol=1e-12, max_iter=100000)
    model.fit(A, X.values[:, j])
    return {int(k) for k, c in zip(parents, model.coef_) if abs(c) > 1e-8}, model.coef_


def test_ordering_helpers():
    o = CausalOrdering((2, 0, 1))
    assert o.position.tolist() == [1, 2, 0]
    assert o.precedes(2, 0) and not o.precedes(1, 0)
    assert o.predecessors(1).tolist() == [0, 2]
    with pytest.raises(ValueError):
        CausalOrdering((0, 0, 1))


@pytest.mark.parametrize("frac", [0.7, 0.3, 0.1])
def test_matches_lasso_oracle(frac):
    spec, X, design = linear_problem()
    order = CausalOrdering(spec.topological_order())
    lam = frac * dag_lambda_max(design, X, order)
    f = fit_dag(design, X, order, lam, SolverOptions(tol=1e-10, obj_tol=1e-14))
    for j in range(design.d):
        parents = order.predecessors(j)
        ref = lasso_parents(design, X, j, parents, lam)
        if not parents.size:
            continue
        est = {int(k) for k in parents if np.abs(f.coefficients[j, k]).sum() > 1e-8}
        assert est == ref[0]
        np.testing.assert_allclose(f.coefficients[j, parents, 0], ref[1], atol=1e-6)


def test_edges_respect_ordering():
    X, design = make_problem(d=7, n=60, seed=5)
    order = CausalOrdering((3, 1, 6, 0, 2, 5, 4))
    f = fit_dag(design, X, order, 0.05)
    g = f.graph()
    assert g.directed and len(g) > 0
    for a, b in g.edges:
        assert order.precedes(a, b)


def test_objective_and_kkt():
    X, design = make_problem(d=6, n=60, seed=2)
    lam = 0.3 * dag_lambda_max(design, X)
    f = fit_dag(design, X, None, lam)
    assert f.objective == pytest.approx(dag_objective(design, X, f.coefficients, lam), rel=1e-10)
    assert dag_kkt_residual(design, X, f) < 1e-6
    assert f.descent_violations == 0


def test_node_lambda_max_empties_node():
    X, design = make_problem(d=5, n=50, seed=1)
    order = CausalOrdering.identity(5)
    lm = node_lambda_max(design, X, 4, order.predecessors(4))
    f = fit_dag(design, X, order, lm)
    assert not f.coefficients[4].any()
    f = fit_dag(design, X, order, 0.9 * lm)
    assert f.coefficients[4].any()


def test_threads_and_backends_agree():
    X, design = make_problem(d=6, n=50, seed=3)
    lam = 0.2 * dag_lambda_max(design, X)
    a = fit_dag(design, X, None, lam, SolverOptions(backend="numba"), threads=1)
    b = fit_dag(design, X, None, lam, SolverOptions(backend="numpy"), threads=3)
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-12)


def test_dag_path():
    X, design = make_problem(d=6, n=60, seed=7)
    lm = dag_lambda_max(design, X)
    path = fit_dag_path(design, X, None, np.geomspace(lm, 0.05 * lm, 8))
    assert path.directed
    assert path.edge_counts()[0] == 0
    assert path.df[0].sum() == 0
    assert np.all(path.kkt < 1e-6)
