"""Accelerated proximal-gradient solver and the full fitting pipeline.

The reduced problem  min ||y_tilde - X_tilde b||^2 + lambda2 ||b||_1  is
solved with FISTA (momentum t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2).  The
quadratic term carries no 1/2, so the gradient Lipschitz constant is twice
the top eigenvalue of X_tilde' X_tilde; internally we minimise the halved
objective with penalty lambda2/2, which has the same minimiser.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError
from .model import LassoProblem, SsrProblem, solve_theta_m, transform_to_lasso


@dataclass
class FistaConfig:
    max_iter: int = 500
    tol: float = 1e-8
    restart: bool = False
    power_iters: int = 20
    power_tol: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")


@dataclass
class LambdaGrid:
    """Finite set of (lambda1, lambda2) penalty pairs, searched in order."""

    pairs: list[tuple[float, float]]

    def __post_init__(self):
        if not self.pairs:
            raise ConfigError("lambda grid must be nonempty")
        self.pairs = [(float(l1), float(l2)) for l1, l2 in self.pairs]
        for l1, l2 in self.pairs:
            if l1 < 0 or l2 < 0:
                raise ConfigError(f"lambda values must be >= 0, got ({l1}, {l2})")

    @classmethod
    def cross(cls, lambda1_values, lambda2_values) -> "LambdaGrid":
        return cls([(l1, l2) for l2 in lambda2_values for l1 in lambda1_values])

    @property
    def lambda2_values(self) -> list[float]:
        seen: list[float] = []
        for _, l2 in self.pairs:
            if l2 not in seen:
                seen.append(l2)
        return seen

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass
class SsrFit:
    """Estimated coefficients and derived components for one penalty pair."""

    theta_m: np.ndarray
    theta_h: np.ndarray
    mu_hat: np.ndarray
    h_hat: np.ndarray
    residual: np.ndarray
    lambda1: float
    lambda2: float
    objective: float


def soft_threshold(v, t: float):
    """Elementwise sign(v) * max(|v| - t, 0)."""
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def fista_solve(
    lasso: LassoProblem, lambda2: float, cfg: FistaConfig | None = None
) -> np.ndarray:
    """Minimize ||y_tilde - X_tilde b||^2 + lambda2 ||b||_1 over b.

    Returns the best iterate seen (by objective value).
    """
    if lambda2 < 0:
        raise ConfigError(f"lambda2 must be >= 0, got {lambda2}")
    cfg = cfg or FistaConfig()
    lam_max = lasso.op.lipschitz(cfg.power_iters, cfg.power_tol)
    if lam_max <= 1e-12:
        # Degenerate design: X_tilde == 0, so beta = 0 is optimal.
        return np.zeros(lasso.n_beta1)
    step = 1.0 / lam_max  # halved-objective Lipschitz constant is lam_max
    thresh = 0.5 * lambda2 * step
    xty = lasso.xty

    def objective(b):
        r = lasso.y_tilde - lasso.apply_x_tilde(b)
        return float(r @ r + lambda2 * np.abs(b).sum())

    beta = np.zeros(lasso.n_beta1)
    alpha = beta.copy()
    t_k = 1.0
    best = beta
    best_obj = prev_obj = objective(beta)
    for _ in range(cfg.max_iter):
        grad = lasso.apply_x_tilde_t(lasso.apply_x_tilde(alpha)) - xty
        beta_next = soft_threshold(alpha - step * grad, thresh)
        if not np.all(np.isfinite(beta_next)):
            raise DivergenceError("FISTA produced non-finite values; check step size")
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        momentum = (t_k - 1.0) / t_next
        if cfg.restart and (beta_next - beta) @ (alpha - beta_next) > 0:
            t_next, momentum = 1.0, 0.0
        alpha = beta_next + momentum * (beta_next - beta)
        beta, t_k = beta_next, t_next
        obj = objective(beta)
        if obj < best_obj:
            best, best_obj = beta, obj
        if abs(prev_obj - obj) <= cfg.tol * max(abs(prev_obj), 1.0):
            break
        prev_obj = obj
    return best


def recover_beta2(lasso: LassoProblem, beta1: np.ndarray) -> np.ndarray:
    """Least-squares completion of the eliminated block given beta1."""
    rhs = lasso.problem.y_star - lasso.op.apply_x1(beta1)
    return lasso.op.x2_pinv(rhs)


def lambda1_path(theta_h_0_lambda2: np.ndarray, lambda1: float) -> np.ndarray:
    """Closed-form sparsity shrinkage from the lambda1 = 0 solution."""
    if lambda1 < 0:
        raise ConfigError(f"lambda1 must be >= 0, got {lambda1}")
    return soft_threshold(theta_h_0_lambda2, lambda1)


def solve_theta_h0(
    problem: SsrProblem, lambda2: float, cfg: FistaConfig | None = None
) -> np.ndarray:
    """Hot-spot coefficients under the fused penalty only (lambda1 = 0)."""
    lasso = transform_to_lasso(problem)
    beta1 = fista_solve(lasso, lambda2, cfg)
    beta2 = recover_beta2(lasso, beta1)
    return problem.op.d_tilde_solve(np.concatenate([beta1, beta2]))


def fit(
    problem: SsrProblem,
    lambda1: float,
    lambda2: float,
    cfg: FistaConfig | None = None,
    theta_h0: np.ndarray | None = None,
) -> SsrFit:
    """Full pipeline: transform, FISTA, back-transform, shrink, mean solve.

    ``theta_h0`` may carry a precomputed lambda1 = 0 solution for the same
    lambda2 (the shrinkage path makes fits over a lambda1 grid free).
    """
    if theta_h0 is None:
        theta_h0 = solve_theta_h0(problem, lambda2, cfg)
    theta_h = lambda1_path(theta_h0, lambda1)
    theta_m = solve_theta_m(problem, theta_h)
    mu_hat = problem.op.apply_mean_basis(theta_m)
    h_hat = problem.op.apply_hot_basis(theta_h)
    residual = problem.y - mu_hat - h_hat
    objective = float(
        residual @ residual
        + lambda1 * np.abs(theta_h).sum()
        + lambda2 * np.abs(problem.op.d_op @ theta_h).sum()
    )
    return SsrFit(
        theta_m=theta_m,
        theta_h=theta_h,
        mu_hat=mu_hat,
        h_hat=h_hat,
        residual=residual,
        lambda1=lambda1,
        lambda2=lambda2,
        objective=objective,
    )
