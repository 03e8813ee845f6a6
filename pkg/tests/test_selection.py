import math

import numpy as np
import pytest

from jamgraph import bic, fit, fit_path, lambda_grid, lambda_max, select
from jamgraph.errors import ZeroResidual
from jamgraph.selection import degrees_of_freedom, select_index

from conftest import make_problem


def test_lambda_max_brute_force(small):
    X, design = small
    n = design.n
    best = 0.0
    for j in range(design.d):
        for k in range(j + 1, design.d):
            bjk = design.psi[k].T @ X.values[:, j] / n
            bkj = design.psi[j].T @ X.values[:, k] / n
            best = max(best, math.sqrt(bjk @ bjk + bkj @ bkj) / math.sqrt(n))
    assert lambda_max(design, X) == pytest.approx(best, rel=1e-12)


def test_grid_shape():
    g = lambda_grid(2.0, 5, 0.1)
    assert g[0] == 2.0 and g[-1] == pytest.approx(0.2)
    assert np.all(np.diff(g) < 0)
    np.testing.assert_allclose(np.diff(np.log(g)), np.log(0.1) / 4)
    for args in ((2.0, 1, 0.1), (2.0, 5, 1.0), (0.0, 5, 0.1)):
        with pytest.raises(ValueError):
            lambda_grid(*args)


def test_df_formula():
    beta = np.zeros((3, 3, 3))
    beta[0, 1] = [0.3, 0.4, 0.0]          # ||beta||^2 = 0.25
    n, lam = 100, 0.01
    F = n * 0.25
    df = degrees_of_freedom(beta, lam, n, np.array([3, 3, 3]))
    assert df[0] == pytest.approx(1 + 2 * F / (F + n * lam))
    assert df[1] == df[2] == 0
    lit = degrees_of_freedom(beta, lam, n, np.array([3, 3, 3]), "literal")
    assert lit[0] == pytest.approx(1 + 2 * F / (F + lam))
    with pytest.raises(ValueError):
        degrees_of_freedom(beta, lam, n, [3, 3, 3], "other")


def test_bic_values(small):
    X, design = small
    f = fit(design, X, 0.3 * lambda_max(design, X))
    per_node, total, rss, df = bic(f, ranks=design.ranks)
    n = design.n
    np.testing.assert_allclose(rss, np.sum(np.asarray(f.residuals) ** 2, axis=0))
    np.testing.assert_allclose(per_node, n * np.log(rss) + np.log(n) * df)
    assert total == pytest.approx(per_node.sum())


def test_bic_zero_residual(small):
    X, design = small
    f = fit(design, X, 0.3 * lambda_max(design, X))
    resid = np.array(f.residuals)
    resid[:, 2] = 0
    bad = type(f)(f.coefficients, f.fitted, resid, f.objective, f.sweeps, f.converged, f.lam)
    with pytest.raises(ZeroResidual):
        bic(bad)


def test_select_ties_prefer_sparser():
    assert select_index([3.0, 1.0, 1.0, 2.0]) == 1


def test_path_warm_start_and_selection(small):
    X, design = small
    grid = lambda_grid(lambda_max(design, X), 12, 0.05)
    path = fit_path(design, X, grid)
    assert len(path) == 12
    assert path.edge_counts()[0] == 0
    assert path.edge_counts()[-1] >= path.edge_counts()[0]
    assert np.all(path.kkt < 1e-6)
    lam, sel = select(path)
    assert lam == grid[np.argmin(path.bic_total)]
    for i in (3, 8):
        cold = fit(design, X, grid[i])
        assert path.fits[i].objective == pytest.approx(cold.objective, abs=1e-8)
    rows = path.rows()
    assert set(rows[0]) == {"lambda", "edge_count", "bic_total", "df_total", "rss_total",
                            "bic_total_literal", "kkt"}


def test_path_rejects_increasing_grid(small):
    X, design = small
    with pytest.raises(ValueError):
        fit_path(design, X, [0.1, 0.2])


def test_literal_convention_is_available():
    X, design = make_problem(d=5, n=50, seed=4)
    grid = lambda_grid(lambda_max(design, X), 6, 0.1)
    path = fit_path(design, X, grid, df_convention="literal")
    assert path.df_convention == "literal"
    assert "bic_total_nscaled" in path.rows()[0]
