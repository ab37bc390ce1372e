import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sdarl.linalg import (DegenerateInputError, lambda_max_gram, normalize_columns,
                          solve_spd_min_norm, top_t_select)


def test_normalize_columns_scales_to_sqrt_n():
    X = np.array([[3.0, 0.0], [4.0, 2.0], [0.0, 0.0], [0.0, 0.0]])
    Xn, scale = normalize_columns(X)
    # column norms 5 and 2, target 2
    np.testing.assert_allclose(scale, [2 / 5, 1.0])
    np.testing.assert_allclose(np.linalg.norm(Xn, axis=0), [2.0, 2.0], rtol=1e-15)
    assert Xn.flags.f_contiguous


def test_zero_column_rejected_unless_allowed():
    X = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(DegenerateInputError):
        normalize_columns(X)
    Xn, scale = normalize_columns(X, allow_zero=True)
    assert scale[1] == 0.0 and not Xn[:, 1].any()


def test_top_t_ties_prefer_lower_index():
    u = np.array([1.0, -3.0, 3.0, 2.0, -3.0])
    sel = top_t_select(u, 2)
    assert sel.indices.tolist() == [1, 2]
    assert sel.threshold == 3.0
    assert top_t_select(u, 4).indices.tolist() == [1, 2, 3, 4]
    assert top_t_select(u, 5).threshold == 1.0


@pytest.mark.parametrize("T", [0, 6])
def test_top_t_range(T):
    with pytest.raises(ValueError):
        top_t_select(np.ones(5), T)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 40), elements=st.integers(-4, 4).map(float)), st.data())
def test_top_t_matches_stable_sort(u, data):
    T = data.draw(st.integers(1, u.size))
    ref = np.sort(np.argsort(-np.abs(u), kind="stable")[:T])
    sel = top_t_select(u, T)
    assert sel.indices.tolist() == ref.tolist()
    assert sel.threshold == np.abs(u)[ref].min()


def test_spd_solve_full_rank():
    A = np.array([[4.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    # Cramer: det 11, x = (3*1 - 1*2, 4*2 - 1*1)/11
    np.testing.assert_allclose(solve_spd_min_norm(A, b), [1 / 11, 7 / 11], rtol=1e-14)


def test_min_norm_on_singular_system():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    b = np.array([2.0, 2.0])
    # solutions x1 + x2 = 2; the shortest is (1, 1)
    np.testing.assert_allclose(solve_spd_min_norm(A, b), [1.0, 1.0], atol=1e-12)


def test_min_norm_duplicate_columns():
    x = np.arange(1.0, 6.0)
    X = np.column_stack([x, x, np.ones(5)])
    y = 2 * x + 1
    beta = solve_spd_min_norm(X.T @ X, X.T @ y)
    np.testing.assert_allclose(beta, [1.0, 1.0, 1.0], atol=1e-9)


def test_asymmetric_rejected():
    with pytest.raises(ValueError):
        solve_spd_min_norm(np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones(2))


def test_zero_matrix_gives_zero():
    assert not solve_spd_min_norm(np.zeros((3, 3)), np.ones(3)).any()


def test_lambda_max_gram():
    X = np.diag([1.0, 2.0, 0.5])
    assert lambda_max_gram(X) == pytest.approx(4.0, rel=1e-14)
