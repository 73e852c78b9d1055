import numpy as np
import pytest

from hotscan.bases import dense_hot_basis, dense_mean_basis
from hotscan.errors import ShapeError
from hotscan.model import (
    SsrProblem,
    augmentation,
    difference_operator,
    objective_generalized,
    objective_reduced,
    objective_split,
    solve_theta_m,
    transform_to_lasso,
)
from hotscan.tensor3 import vec, unvec

from conftest import small_problem


def test_difference_operator_entries():
    d = difference_operator(2, 2, 3).toarray()
    assert d.shape == (8, 12)
    for i in range(8):
        assert d[i, i] == -1.0
        assert d[i, i + 4] == 1.0
    assert np.count_nonzero(d) == 16


def test_difference_operator_is_slice_difference():
    rng = np.random.default_rng(0)
    n1, n2, n3 = 3, 2, 4
    d = difference_operator(n1, n2, n3)
    theta = rng.normal(size=n1 * n2 * n3)
    t3 = unvec(theta, (n1, n2, n3))
    got = (d @ theta).reshape((n1, n2, n3 - 1), order="F")
    want = t3.data[:, :, 1:] - t3.data[:, :, :-1]
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_augmented_operator_square_invertible():
    a, d_tilde = augmentation(2, 2, 3)
    assert a.shape == (4, 12)
    np.testing.assert_array_equal(
        a.toarray(), np.hstack([np.eye(4)] * 3)
    )
    dense = d_tilde.toarray()
    assert dense.shape == (12, 12)
    assert abs(np.linalg.det(dense)) > 1e-9


def test_d_tilde_solve_matches_dense(rng):
    p = small_problem(rng)
    dense = p.op.d_tilde.toarray()
    b = rng.normal(size=dense.shape[0])
    np.testing.assert_allclose(p.op.d_tilde_solve(b), np.linalg.solve(dense, b), rtol=1e-10)
    np.testing.assert_allclose(
        p.op.d_tilde_solve_t(b), np.linalg.solve(dense.T, b), rtol=1e-10
    )


def test_mean_projector_matches_dense(rng):
    p = small_problem(rng)
    bm = dense_mean_basis(p.op.bases)
    u, s, _ = np.linalg.svd(bm)
    u = u[:, s > 1e-8 * s[0]]
    h = u @ u.T
    v = rng.normal(size=p.op.n)
    np.testing.assert_allclose(p.op.apply_mean_projector(v), h @ v, rtol=1e-10, atol=1e-12)
    # idempotence
    hv = p.op.apply_mean_projector(v)
    np.testing.assert_allclose(p.op.apply_mean_projector(hv), hv, rtol=1e-10)


def test_y_star_is_projected_response(rng):
    p = small_problem(rng)
    np.testing.assert_allclose(
        p.y_star, p.y - p.op.apply_mean_projector(p.y), rtol=1e-12
    )


def test_apply_x_matches_dense(rng):
    p = small_problem(rng)
    xd = p.op.dense_x()
    v = rng.normal(size=p.op.n)
    np.testing.assert_allclose(p.op.apply_x(v), xd @ v, rtol=1e-10, atol=1e-12)
    w = rng.normal(size=p.op.n)
    np.testing.assert_allclose(p.op.apply_xt(w), xd.T @ w, rtol=1e-10, atol=1e-12)


def test_x_split_matches_dense_columns(rng):
    p = small_problem(rng)
    op = p.op
    xd = op.dense_x() @ np.linalg.inv(op.d_tilde.toarray())
    n_b1 = op.n - op.n_slice
    np.testing.assert_allclose(op.dense_x1(), xd[:, :n_b1], rtol=1e-9, atol=1e-11)
    np.testing.assert_allclose(op.x2, xd[:, n_b1:], rtol=1e-9, atol=1e-11)


def test_projector_p_properties(rng):
    p = small_problem(rng)
    v = rng.normal(size=p.op.n)
    pv = p.op.apply_p(v)
    np.testing.assert_allclose(p.op.apply_p(pv), pv, rtol=1e-10, atol=1e-12)
    # Pv lies in col(X2): residual of least squares onto X2 is ~0
    beta, *_ = np.linalg.lstsq(p.op.x2, pv, rcond=None)
    np.testing.assert_allclose(p.op.x2 @ beta, pv, rtol=1e-8, atol=1e-10)


def test_theta_m_normal_equations(rng):
    p = small_problem(rng)
    theta_h = rng.normal(size=p.op.n)
    theta_m = solve_theta_m(p, theta_h)
    bm = dense_mean_basis(p.op.bases)
    bh = dense_hot_basis(p.op.bases)
    lhs = bm.T @ bm @ theta_m
    rhs = bm.T @ (p.y - bh @ theta_h)
    assert np.linalg.norm(lhs - rhs) <= 1e-6 * np.linalg.norm(bm.T @ p.y)


def test_theta_m_shape_check(rng):
    p = small_problem(rng)
    with pytest.raises(ShapeError):
        solve_theta_m(p, np.zeros(3))


def test_objective_equivalence_at_transformed_point(rng):
    for _ in range(10):
        p = small_problem(rng)
        lam2 = 0.3
        beta = rng.normal(size=p.op.n)
        n_b1 = p.op.n - p.op.n_slice
        beta1, beta2 = beta[:n_b1], beta[n_b1:]
        theta = p.op.d_tilde_solve(beta)
        left = objective_generalized(p, theta, lam2)
        right = objective_split(p, beta1, beta2, lam2)
        assert left == pytest.approx(right, rel=1e-8)


def test_split_equals_reduced_plus_eliminated(rng):
    for _ in range(10):
        p = small_problem(rng)
        lam2 = 0.2
        n_b1 = p.op.n - p.op.n_slice
        beta1 = rng.normal(size=n_b1)
        beta2 = rng.normal(size=p.op.n_slice)
        split = objective_split(p, beta1, beta2, lam2)
        reduced = objective_reduced(p, beta1, lam2)
        r = p.y_star - p.op.apply_x1(beta1)
        eliminated = p.op.apply_p(r) - p.op.x2 @ beta2
        assert split == pytest.approx(reduced + eliminated @ eliminated, rel=1e-8)


def test_lipschitz_matches_dense_eigenvalue(rng):
    p = small_problem(rng)
    xt = p.op.dense_x_tilde()
    want = np.linalg.eigvalsh(xt.T @ xt).max()
    got = p.op.lipschitz(n_iter=200, tol=1e-12)
    assert got == pytest.approx(want, rel=1e-6)


def test_lasso_problem_views(rng):
    p = small_problem(rng)
    lasso = transform_to_lasso(p)
    assert lasso.n_beta1 == p.op.n - p.op.n_slice
    b = rng.normal(size=lasso.n_beta1)
    np.testing.assert_allclose(lasso.apply_x_tilde(b), p.op.apply_x_tilde(b))
    np.testing.assert_allclose(lasso.xty, p.xty)
