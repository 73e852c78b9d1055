import numpy as np
import pytest

from hotscan.errors import ConfigError
from hotscan.model import objective_generalized, objective_reduced, transform_to_lasso
from hotscan.solver import (
    FistaConfig,
    LambdaGrid,
    fista_solve,
    fit,
    lambda1_path,
    recover_beta2,
    soft_threshold,
    solve_theta_h0,
)

from conftest import small_problem

cvxpy = pytest.importorskip("cvxpy")


def cd_lasso(x, y, lam, n_sweeps=3000, tol=1e-12):
    """Cyclic coordinate descent for min ||y - x b||^2 + lam ||b||_1."""
    n, p = x.shape
    b = np.zeros(p)
    col_ss = (x * x).sum(axis=0)
    r = y - x @ b
    prev = r @ r
    for _ in range(n_sweeps):
        for j in range(p):
            if col_ss[j] == 0.0:
                continue
            r += x[:, j] * b[j]
            rho = x[:, j] @ r
            b[j] = np.sign(rho) * max(abs(rho) - lam / 2.0, 0.0) / col_ss[j]
            r -= x[:, j] * b[j]
        obj = r @ r + lam * np.abs(b).sum()
        if abs(prev - obj) <= tol * max(abs(prev), 1.0):
            break
        prev = obj
    return b


def test_soft_threshold_values():
    v = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    np.testing.assert_allclose(
        soft_threshold(v, 1.0), [-1.0, 0.0, 0.0, 0.0, 1.0]
    )
    with pytest.raises(ValueError):
        soft_threshold(v, -0.1)


def test_fista_rejects_negative_lambda(rng):
    p = small_problem(rng)
    with pytest.raises(ConfigError):
        fista_solve(transform_to_lasso(p), -1.0)


def test_fista_matches_coordinate_descent(rng):
    cfg = FistaConfig(max_iter=3000, tol=1e-14)
    for k in range(5):
        p = small_problem(np.random.default_rng(100 + k))
        lasso = transform_to_lasso(p)
        xt = p.op.dense_x_tilde()
        for lam in (0.05, 0.3):
            beta = fista_solve(lasso, lam, cfg)
            beta_cd = cd_lasso(xt, p.y_tilde, lam)
            obj = objective_reduced(p, beta, lam)
            obj_cd = objective_reduced(p, beta_cd, lam)
            assert obj == pytest.approx(obj_cd, rel=1e-6)


def test_fista_matches_cvxpy_lasso(rng):
    p = small_problem(rng)
    lasso = transform_to_lasso(p)
    lam = 0.2
    beta = fista_solve(lasso, lam, FistaConfig(max_iter=3000, tol=1e-14))
    xt = p.op.dense_x_tilde()
    b = cvxpy.Variable(xt.shape[1])
    prob = cvxpy.Problem(
        cvxpy.Minimize(cvxpy.sum_squares(p.y_tilde - xt @ b) + lam * cvxpy.norm1(b))
    )
    prob.solve()
    assert objective_reduced(p, beta, lam) == pytest.approx(prob.value, rel=1e-6)


def test_recover_beta2_zero_beta1_is_least_squares(rng):
    p = small_problem(rng)
    lasso = transform_to_lasso(p)
    beta2 = recover_beta2(lasso, np.zeros(lasso.n_beta1))
    # normal equations of the OLS fit of y_star on X2
    res = p.op.x2.T @ (p.y_star - p.op.x2 @ beta2)
    assert np.linalg.norm(res) <= 1e-8 * max(1.0, np.linalg.norm(p.op.x2.T @ p.y_star))


def test_solve_theta_h0_matches_cvxpy_generalized_lasso(rng):
    p = small_problem(rng)
    lam2 = 0.3
    theta = solve_theta_h0(p, lam2, FistaConfig(max_iter=4000, tol=1e-14))
    d = p.op.d_op.toarray()
    xd = p.op.dense_x()
    th = cvxpy.Variable(p.op.n)
    prob = cvxpy.Problem(
        cvxpy.Minimize(
            cvxpy.sum_squares(p.y_star - xd @ th) + lam2 * cvxpy.norm1(d @ th)
        )
    )
    prob.solve()
    assert objective_generalized(p, theta, lam2) == pytest.approx(prob.value, rel=1e-4)


def test_lambda1_path_is_soft_threshold():
    theta0 = np.array([0.5, -0.3, 0.05, 0.0])
    np.testing.assert_allclose(
        lambda1_path(theta0, 0.1), [0.4, -0.2, 0.0, 0.0]
    )
    with pytest.raises(ConfigError):
        lambda1_path(theta0, -1.0)


def test_path_shrinkage_monotone(rng):
    p = small_problem(rng)
    theta0 = solve_theta_h0(p, 0.1)
    prev = lambda1_path(theta0, 0.0)
    for lam1 in (0.01, 0.05, 0.1, 0.5):
        cur = lambda1_path(theta0, lam1)
        assert np.all(np.abs(cur) <= np.abs(prev))
        assert np.all(cur * prev >= 0)  # never flips sign
        prev = cur


def test_fit_objective_not_worse_than_zero(rng):
    p = small_problem(rng)
    f = fit(p, 0.05, 0.2)
    baseline = fit(p, 0.0, 0.0, theta_h0=np.zeros(p.op.n))
    assert f.objective <= baseline.objective + 1e-10
    # components are consistent
    np.testing.assert_allclose(
        f.residual, p.y - f.mu_hat - f.h_hat, rtol=1e-12, atol=1e-12
    )


def test_lambda_grid_cross():
    g = LambdaGrid.cross([0.1, 0.2], [1.0, 2.0])
    assert len(g) == 4
    assert g.lambda2_values == [1.0, 2.0]
    assert (0.2, 1.0) in list(g)
