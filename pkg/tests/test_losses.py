import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdarl.losses import LinearLoss, LogisticLoss, SparseCoef, log1pexp
from sdarl.oracle import finite_diff_gradient


def test_linear_hand_values():
    X = np.eye(2)
    L = LinearLoss(X, np.array([2.0, 3.0]))
    # residual X b + 1 - y = (-1, -2)
    assert L.value(np.zeros(2)) == pytest.approx(5 / 4)
    np.testing.assert_allclose(L.gradient(np.zeros(2)), [-0.5, -1.0])
    assert L.value(np.array([1.0, 2.0])) == 0.0


def test_linear_without_intercept():
    L = LinearLoss(np.eye(2), np.array([2.0, 3.0]), intercept=False)
    assert L.value(np.zeros(2)) == pytest.approx(13 / 4)


def test_logistic_hand_values():
    L = LogisticLoss(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]))
    assert L.value(np.zeros(1)) == pytest.approx(math.log(2))
    np.testing.assert_allclose(L.gradient(np.zeros(1)), [-0.5])
    # both rows push beta up; F(b) = log(1 + e^-b)
    assert L.value(np.array([2.0])) == pytest.approx(math.log1p(math.exp(-2.0)))


def test_log1pexp_stable():
    z = np.array([-1000.0, -30.0, 0.0, 30.0, 1000.0])
    out = log1pexp(z)
    assert np.all(np.isfinite(out))
    assert out[-1] == 1000.0 and out[0] == 0.0
    np.testing.assert_allclose(out[1:4], np.log1p(np.exp(z[1:4])), rtol=1e-15)


def test_logistic_value_finite_at_extreme_eta():
    L = LogisticLoss(np.array([[1.0], [1.0]]), np.array([0.0, 1.0]))
    v = L.value(np.array([800.0]))
    assert math.isfinite(v) and v == pytest.approx(400.0)


@pytest.mark.parametrize("kind", ["linear", "logistic"])
def test_gradient_matches_finite_differences(kind, small_linear, small_logistic):
    L = small_linear.loss() if kind == "linear" else small_logistic.loss()
    beta = np.random.default_rng(1).normal(scale=0.3, size=L.p)
    np.testing.assert_allclose(L.gradient(beta), finite_diff_gradient(L, beta, 1e-5), atol=1e-8)


def test_sparse_and_dense_agree(small_linear):
    L = small_linear.loss()
    dense = np.zeros(L.p)
    dense[[3, 7]] = [1.5, -2.0]
    sp = SparseCoef.from_dense(dense)
    assert L.loss_value(sp) == L.loss_value(dense)
    np.testing.assert_array_equal(L.loss_gradient(sp), L.loss_gradient(dense))


def test_sparse_coef_validation():
    with pytest.raises(ValueError):
        SparseCoef(5, np.array([3, 1]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        SparseCoef(5, np.array([5]), np.array([1.0]))
    c = SparseCoef.from_dense(np.array([0.0, 2.0, 0.0, -1.0]))
    assert c.support.tolist() == [1, 3] and c.nnz() == 2


def test_linear_restricted_minimizer_is_least_squares(small_linear):
    L = small_linear.loss()
    A = np.array([0, 5, 9, 21])
    fit = L.minimize_restricted(A)
    ref, *_ = np.linalg.lstsq(L.X[:, A], L.y - 1.0, rcond=None)
    np.testing.assert_allclose(fit.beta[A], ref, rtol=1e-10)
    assert not np.delete(fit.beta, A).any()
    assert np.abs(L.gradient(fit.beta)[A]).max() < 1e-10


def test_linear_restricted_duplicate_columns_min_norm():
    x = np.array([1.0, -1.0, 2.0, 0.5])
    X = np.column_stack([x, x, np.ones(4)])
    L = LinearLoss(X, 3 * x + 1, intercept=True)
    b = L.minimize_restricted(np.array([0, 1])).beta
    np.testing.assert_allclose(b[:2], [1.5, 1.5], atol=1e-10)


def test_logistic_newton_reaches_stationarity(small_logistic):
    L = small_logistic.loss()
    A = small_logistic.support
    fit = L.minimize_restricted(A)
    assert np.abs(L.gradient(fit.beta)[A]).max() <= 1e-8
    assert not fit.separated


def test_logistic_separation_flagged():
    X = np.array([[1.0], [2.0], [-1.0], [-2.0]])
    L = LogisticLoss(X, np.array([1.0, 1.0, 0.0, 0.0]))
    fit = L.minimize_restricted(np.array([0]))
    assert fit.separated
    assert math.isfinite(L.value(fit.beta))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_logistic_gradient_property(seed):
    rng = np.random.default_rng(seed)
    n, p = rng.integers(5, 30), rng.integers(2, 12)
    X = rng.normal(size=(n, p))
    y = (rng.random(n) < 0.5).astype(float)
    L = LogisticLoss(X, y)
    b = rng.normal(size=p)
    g = L.gradient(b)
    fd = finite_diff_gradient(L, b, 1e-5)
    assert np.all(np.abs(g - fd) <= 1e-6 * np.maximum(np.abs(g), 1e-3))
