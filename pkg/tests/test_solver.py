import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jamgraph import SolverOptions, fit, kkt_residual, lambda_max, objective
from jamgraph.errors import ShapeMismatch
from jamgraph.kernels import joint_objective, joint_sweep, pair_norms
from jamgraph.solver import SolverState, block_update, edge_set, lex_pairs

from conftest import make_problem
from oracles import fista_joint, joint_objective_ref

TIGHT = SolverOptions(tol=1e-11, obj_tol=1e-15, max_sweeps=20000)


def test_objective_matches_reference(small):
    X, design = small
    beta = np.random.default_rng(1).normal(size=(design.d, design.d, design.r))
    beta[np.arange(design.d), np.arange(design.d)] = 0
    ref = joint_objective_ref(design.psi, X.values, beta, 0.07)
    assert objective(design, X, beta, 0.07) == pytest.approx(ref, rel=1e-12)


def test_cached_objective_matches_literal(small):
    X, design = small
    f = fit(design, X, 0.3 * lambda_max(design, X))
    assert f.objective == pytest.approx(objective(design, X, f.coefficients, f.lam), rel=1e-12)


def test_two_variable_closed_form():
    # with d = 2 there is one pair, so a single coupled update is exact
    X, design = make_problem(d=2, n=40, seed=3, degrees=(1,), m=1)
    n = design.n
    x = X.values
    b12 = design.psi[1][:, 0] @ x[:, 0] / n
    b21 = design.psi[0][:, 0] @ x[:, 1] / n
    nu = math.sqrt(n) * math.hypot(b12, b21)
    lam = 0.5 * nu / n
    scale = max(0.0, 1 - n * lam / nu)
    f = fit(design, X, lam)
    assert f.coefficients[0, 1, 0] == pytest.approx(scale * b12, abs=1e-12)
    assert f.coefficients[1, 0, 0] == pytest.approx(scale * b21, abs=1e-12)
    assert f.sweeps <= 2


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("frac", [0.2, 0.5, 0.8])
def test_matches_proximal_gradient_oracle(seed, frac):
    X, design = make_problem(d=3, n=30, seed=seed, degrees=(1, 2), m=2)
    lam = frac * lambda_max(design, X)
    ref_beta, ref_obj = fista_joint(design.psi, X.values, lam)
    f = fit(design, X, lam, TIGHT)
    assert abs(f.objective - ref_obj) < 1e-8
    np.testing.assert_allclose(f.coefficients, ref_beta, atol=1e-5)


def test_coupling_zeroes_both_directions(small):
    X, design = small
    f = fit(design, X, 0.4 * lambda_max(design, X))
    sq = np.einsum("jkr,jkr->jk", f.coefficients, f.coefficients)
    off = ~np.eye(design.d, dtype=bool)
    assert np.array_equal((sq > 0)[off], (sq.T > 0)[off])


def test_monotone_descent(small):
    X, design = small
    lmax = lambda_max(design, X)
    for frac in (0.9, 0.5, 0.1, 0.02):
        f = fit(design, X, frac * lmax)
        assert f.descent_violations == 0
        assert np.all(np.diff(f.objective_trace) <= 1e-12)


def test_block_update_never_increases(small):
    X, design = small
    state = SolverState.start(design, X, 0.1 * lambda_max(design, X), backend="numpy")
    prev = state.objective()
    for j, k in lex_pairs(design.d)[::-1]:
        block_update(state, j, k)
        cur = state.objective()
        assert cur <= prev + 1e-12
        prev = cur


def test_sweep_order_does_not_change_solution(small):
    X, design = small
    lam = 0.2 * lambda_max(design, X)
    a = fit(design, X, lam, TIGHT)
    pairs = lex_pairs(design.d)[np.random.default_rng(0).permutation(design.d * (design.d - 1) // 2)]
    b = fit(design, X, lam, TIGHT, pairs=pairs)
    assert a.objective == pytest.approx(b.objective, abs=1e-10)
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-6)


def test_backends_agree(small):
    X, design = small
    lam = 0.15 * lambda_max(design, X)
    out = {}
    for backend in ("numba", "numpy"):
        out[backend] = fit(design, X, lam, SolverOptions(backend=backend))
    assert out["numba"].sweeps == out["numpy"].sweeps
    np.testing.assert_allclose(out["numba"].coefficients, out["numpy"].coefficients, atol=1e-12)


def test_sweep_kernels_identical_step():
    X, design = make_problem(d=5, n=40, seed=2)
    pairs = lex_pairs(5)
    res = {}
    for backend in ("numba", "numpy"):
        st_ = SolverState.start(design, X, 0.05, backend=backend)
        deltas = [joint_sweep(st_.psit, st_.beta, st_.resid, 0.05, pairs, backend) for _ in range(3)]
        res[backend] = (st_.beta.copy(), deltas)
        assert joint_objective(st_.resid, st_.beta, 0.05, "numba") == pytest.approx(
            joint_objective(st_.resid, st_.beta, 0.05, "numpy"), rel=1e-13)
    np.testing.assert_allclose(res["numba"][0], res["numpy"][0], atol=1e-13)
    np.testing.assert_allclose(res["numba"][1], res["numpy"][1], rtol=1e-10)


def test_kkt_certifies_solution(small):
    X, design = small
    f = fit(design, X, 0.3 * lambda_max(design, X))
    assert f.converged
    assert kkt_residual(design, X, f) < 1e-6


def test_kkt_flags_perturbed_solution(small):
    X, design = small
    f = fit(design, X, 0.3 * lambda_max(design, X))
    beta = np.array(f.coefficients)
    beta[0, 1] += 0.05
    bad = type(f)(beta, f.fitted, f.residuals, f.objective, f.sweeps, f.converged, f.lam)
    assert kkt_residual(design, X, bad) > 1e-3


def test_zero_solution_at_lambda_max(small):
    X, design = small
    lmax = lambda_max(design, X)
    assert len(fit(design, X, lmax).graph()) == 0
    assert len(fit(design, X, 0.95 * lmax).graph()) >= 1


def test_warm_start_reaches_same_optimum(small):
    X, design = small
    lmax = lambda_max(design, X)
    cold = fit(design, X, 0.2 * lmax, TIGHT)
    warm = fit(design, X, 0.2 * lmax, TIGHT, beta0=fit(design, X, 0.4 * lmax).coefficients)
    assert warm.objective == pytest.approx(cold.objective, abs=1e-10)


def test_inactive_pairs_keep_start():
    X, design = make_problem(d=4, n=40, seed=1)
    f = fit(design, X, 0.05, pairs=[[0, 1], [2, 3]])
    norms = pair_norms(f.coefficients)
    assert norms[0, 2] == norms[1, 3] == 0.0


def test_bad_inputs(small):
    X, design = small
    with pytest.raises(ValueError):
        fit(design, X, 0.0)
    with pytest.raises(ShapeMismatch):
        fit(design, X.values[:, :3], 0.1)
    with pytest.raises(ValueError):
        fit(design, X, 0.1, pairs=[[2, 1]])


def test_edge_set_symmetrises():
    beta = np.zeros((3, 3, 2))
    beta[2, 0, 1] = 1.0
    assert edge_set(beta).edges == {(0, 2)}


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), frac=st.floats(0.05, 0.95))
def test_fit_is_stationary_and_descends(seed, frac):
    X, design = make_problem(d=4, n=30, seed=seed, degrees=(1, 2))
    f = fit(design, X, frac * lambda_max(design, X))
    assert f.descent_violations == 0
    assert kkt_residual(design, X, f) < 1e-6
