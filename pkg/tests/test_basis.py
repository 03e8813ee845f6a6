import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from jamgraph import BasisSpec, DataMatrix, expand, orthonormalize, standardize
from jamgraph.basis import numerical_rank, raw_powers
from jamgraph.errors import ConstantColumn, RankDeficient, ShapeMismatch


def test_spec_parse_and_validation():
    assert BasisSpec.parse("1, 2,3").degrees == (1, 2, 3)
    assert BasisSpec.parse("1").r == 1
    assert str(BasisSpec((1, 3))) == "1,3"
    for bad in ((), (0, 1), (2, 1), (1, 1)):
        with pytest.raises(ValueError):
            BasisSpec(bad)


def test_standardize_ddof0(rng):
    X = standardize(rng.normal(3.0, 2.0, size=(40, 4)))
    np.testing.assert_allclose(X.values.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose((X.values**2).mean(axis=0), 1, atol=1e-12)
    assert X.standardized
    assert standardize(X) is X


def test_unstandardize_roundtrip(rng):
    raw = rng.normal(size=(30, 3)) * [1, 5, 0.1] + [0, 2, -7]
    X = standardize(DataMatrix(raw))
    np.testing.assert_allclose(X.unstandardize(), raw, atol=1e-12)


def test_constant_column_rejected(rng):
    raw = rng.normal(size=(20, 3))
    raw[:, 1] = 4.2
    with pytest.raises(ConstantColumn) as err:
        standardize(raw)
    assert err.value.column == 1


def test_datamatrix_shape_checks():
    with pytest.raises(ShapeMismatch):
        DataMatrix(np.zeros(5))
    with pytest.raises(ShapeMismatch):
        DataMatrix(np.zeros((4, 2)), names=("a",))


def test_orthonormalize_identity_on_orthonormal_input(rng):
    n = 50
    Q, _ = np.linalg.qr(rng.normal(size=(n, 3)))
    Q = Q * np.sqrt(n)
    Q = Q * np.sign(np.diag(np.linalg.qr(Q)[1]))
    out, T = orthonormalize(Q)
    np.testing.assert_allclose(T, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(out, Q, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (25, 3), elements=st.floats(-10, 10)))
def test_orthonormalize_property(M):
    if numerical_rank(M) < 3 or np.linalg.cond(M) > 1e6:
        with pytest.raises(RankDeficient) if numerical_rank(M) < 3 else _null():
            orthonormalize(M)
        return
    Q, T = orthonormalize(M)
    np.testing.assert_allclose(Q.T @ Q / 25, np.eye(3), atol=1e-8)
    np.testing.assert_allclose(M @ T, Q, atol=1e-6 * max(1.0, np.abs(Q).max()))
    assert np.allclose(T, np.triu(T))


class _null:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def test_orthonormalize_rank_deficient(rng):
    x = rng.normal(size=30)
    with pytest.raises(RankDeficient):
        orthonormalize(np.column_stack([x, 2 * x]))


def test_expand_is_orthonormal_and_centered(small):
    X, design = small
    n = design.n
    for k in range(design.d):
        np.testing.assert_allclose(design.psi[k].T @ design.psi[k] / n, np.eye(design.r), atol=1e-10)
        np.testing.assert_allclose(design.psi[k].mean(axis=0), 0, atol=1e-10)
        centered = raw_powers(X.values[:, k], design.spec) - design.means[k]
        np.testing.assert_allclose(centered @ design.transforms[k], design.psi[k], atol=1e-8)
    assert design.psit.shape == (design.d, design.r, n)
    assert design.pair(0, 2) is not None and np.shares_memory(design.pair(0, 2), design.psi[2])


def test_raw_coefficients_reproduce_component(small):
    X, design = small
    beta = np.array([0.3, -0.2, 0.1])
    intercept, coefs = design.raw_coefficients(2, beta)
    x = X.values[:, 2]
    poly = intercept + sum(c * x**p for c, p in zip(coefs, design.spec.degrees))
    np.testing.assert_allclose(poly, design.psi[2] @ beta, atol=1e-10)


def test_expand_strict_and_lenient(rng):
    x = rng.normal(size=40)
    binary = np.where(rng.random(40) < 0.5, -1.0, 1.0)
    X = standardize(np.column_stack([x, binary]))
    with pytest.raises(RankDeficient):
        expand(X, BasisSpec((1, 2, 3)))
    design = expand(X, BasisSpec((1, 2, 3)), strict=False)
    assert design.ranks.tolist() == [3, 1]
    np.testing.assert_allclose(design.psi[1][:, 1:], 0)
    np.testing.assert_allclose(design.psi[1][:, :1].T @ design.psi[1][:, :1] / 40, [[1.0]], atol=1e-10)


def test_expand_needs_more_rows_than_basis():
    with pytest.raises(ShapeMismatch):
        expand(np.arange(6.0).reshape(3, 2), BasisSpec((1, 2, 3)))


def test_subset_keeps_blocks(small):
    _, design = small
    sub = design.subset([4, 1])
    np.testing.assert_array_equal(sub.psi[0], design.psi[4])
    assert sub.d == 2
