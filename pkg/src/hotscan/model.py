"""Assembly of the estimation problem.

Eliminates the smooth-mean coefficients in closed form, projects the
response, builds the temporal first-difference operator D and its square
augmentation, and changes variables so the temporally-fused penalty becomes
a plain l1 penalty on the first coefficient block.

Everything is implemented as linear operators built from per-mode matrix
actions; the full Kronecker matrices are never materialized except in the
small dense helpers used by tests.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .bases import BasisSet
from .errors import ConfigError, NumericalError, ShapeError
from .tensor3 import Identity, Tensor3, multi_mode_product, unvec, vec


def difference_operator(n1: int, n2: int, n3: int) -> sp.csr_matrix:
    """Temporal first differences: row i maps theta to slice_{t+1} - slice_t.

    Shape (n1*n2*(n3-1), n1*n2*n3); row i has -1 at column i and +1 at
    column i + n1*n2, so D @ theta stacks theta_t - theta_{t-1} for
    t = 2..n3.
    """
    if n3 < 2:
        raise ConfigError(f"difference operator needs n3 >= 2, got {n3}")
    n = n1 * n2
    rows = n * (n3 - 1)
    i = np.arange(rows)
    d = sp.coo_matrix(
        (
            np.concatenate([-np.ones(rows), np.ones(rows)]),
            (np.concatenate([i, i]), np.concatenate([i, i + n])),
        ),
        shape=(rows, n * n3),
    )
    return d.tocsr()


def augmentation(n1: int, n2: int, n3: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Null-space completion A = [I I ... I] and the square stack [D; A]."""
    if n3 < 2:
        raise ConfigError(f"augmentation needs n3 >= 2, got {n3}")
    n = n1 * n2
    a = sp.hstack([sp.identity(n, format="csr")] * n3, format="csr")
    d = difference_operator(n1, n2, n3)
    d_tilde = sp.vstack([d, a], format="csr")
    return a, d_tilde


def _orth_pinv(b: np.ndarray, rcond: float):
    """Rank-truncated (projector, pseudoinverse) pair for one basis matrix."""
    u, s, vt = np.linalg.svd(b)
    keep = s > rcond * s[0]
    if not np.any(keep):
        raise NumericalError("basis matrix has numerical rank zero")
    ur = u[:, keep]
    pinv = (vt[keep].T / s[keep]) @ ur.T
    proj = ur @ ur.T
    return proj, pinv


class SsrOperator:
    """Shape- and basis-dependent machinery, reusable across observations.

    Precomputes per-mode projectors/pseudoinverses, the sparse LU of the
    augmented difference operator, and the thin SVD of the X2 block.  All
    heavy objects depend only on (dims, bases), so one instance serves every
    replication of a Monte-Carlo experiment.
    """

    def __init__(self, bases: BasisSet, dims):
        self.dims = tuple(int(d) for d in dims)
        n1, n2, n3 = self.dims
        if n3 < 2:
            raise ConfigError("need at least two time steps")
        bases.check_dims(self.dims)
        self.bases = bases
        self.n_slice = n1 * n2
        self.n = n1 * n2 * n3

        # Per-mode mean projectors H and pseudoinverses B^+ (None = identity).
        self.mean_proj = []
        self.mean_pinv = []
        for k, b in enumerate(bases.mean_mats(), start=1):
            if isinstance(b, Identity):
                self.mean_proj.append(None)
                self.mean_pinv.append(None)
            else:
                try:
                    proj, pinv = _orth_pinv(b, bases.rcond)
                except NumericalError as e:
                    raise NumericalError(f"mean basis at mode {k}: {e}") from e
                self.mean_proj.append(proj)
                self.mean_pinv.append(pinv)

        self.d_op = difference_operator(n1, n2, n3)
        self.a_op, self.d_tilde = augmentation(n1, n2, n3)
        self._lu = splu(self.d_tilde.tocsc())

        # X2 = X @ d_tilde^{-1}[:, -n_slice:]; the inverse block is the
        # time-constant embedding tile(I)/n3, so X2 is n x n_slice and cheap.
        x2 = np.empty((self.n, self.n_slice))
        for j in range(self.n_slice):
            w = np.zeros(self.n)
            w[np.arange(n3) * self.n_slice + j] = 1.0 / n3
            x2[:, j] = self.apply_x(w)
        self.x2 = x2
        u2, s2, v2t = np.linalg.svd(x2, full_matrices=False)
        keep = s2 > max(max(bases.rcond, 1e-12) * s2[0], 1e-12)
        if not np.all(keep):
            warnings.warn(
                f"X2 block is rank deficient (rank {int(keep.sum())} of "
                f"{self.n_slice}); using minimum-norm completion",
                stacklevel=2,
            )
        self._x2_u = u2[:, keep]
        self._x2_sv = s2[keep]
        self._x2_v = v2t[keep].T
        self._lipschitz: float | None = None

    # -- elementary actions ------------------------------------------------

    def _tensorize(self, v: np.ndarray) -> Tensor3:
        return unvec(v, self.dims)

    def apply_hot_basis(self, v: np.ndarray) -> np.ndarray:
        return vec(multi_mode_product(self._tensorize(v), self.bases.hot_mats()))

    def apply_hot_basis_t(self, v: np.ndarray) -> np.ndarray:
        mats = [None if isinstance(b, Identity) else b.T for b in self.bases.hot_mats()]
        return vec(multi_mode_product(self._tensorize(v), mats))

    def apply_mean_basis(self, v: np.ndarray) -> np.ndarray:
        return vec(multi_mode_product(self._tensorize(v), self.bases.mean_mats()))

    def apply_mean_projector(self, v: np.ndarray) -> np.ndarray:
        """H_m v via one projector product per non-identity mode."""
        return vec(multi_mode_product(self._tensorize(v), self.mean_proj))

    def apply_mean_pinv(self, v: np.ndarray) -> np.ndarray:
        """(B_m' B_m)^{-1} B_m' v, factor-wise per mode."""
        return vec(multi_mode_product(self._tensorize(v), self.mean_pinv))

    def apply_x(self, v: np.ndarray) -> np.ndarray:
        """X v with X = (I - H_m) B_h."""
        w = self.apply_hot_basis(v)
        return w - self.apply_mean_projector(w)

    def apply_xt(self, v: np.ndarray) -> np.ndarray:
        w = v - self.apply_mean_projector(v)
        return self.apply_hot_basis_t(w)

    def d_tilde_solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(b)

    def d_tilde_solve_t(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(b, trans="T")

    # -- transformed design ------------------------------------------------

    def apply_x1(self, beta1: np.ndarray) -> np.ndarray:
        padded = np.concatenate([beta1, np.zeros(self.n_slice)])
        return self.apply_x(self.d_tilde_solve(padded))

    def apply_x1t(self, v: np.ndarray) -> np.ndarray:
        return self.d_tilde_solve_t(self.apply_xt(v))[: self.n - self.n_slice]

    def apply_p(self, v: np.ndarray) -> np.ndarray:
        """Projection onto the (numerical) column space of X2."""
        return self._x2_u @ (self._x2_u.T @ v)

    def x2_pinv(self, rhs: np.ndarray) -> np.ndarray:
        """Minimum-norm least-squares solve X2 beta2 ~ rhs."""
        return self._x2_v @ ((self._x2_u.T @ rhs) / self._x2_sv)

    def apply_x_tilde(self, beta1: np.ndarray) -> np.ndarray:
        w = self.apply_x1(beta1)
        return w - self.apply_p(w)

    def apply_x_tilde_t(self, v: np.ndarray) -> np.ndarray:
        return self.apply_x1t(v - self.apply_p(v))

    def lipschitz(self, n_iter: int = 20, tol: float = 1e-6) -> float:
        """Largest eigenvalue of X_tilde' X_tilde by power iteration."""
        if self._lipschitz is None:
            rng = np.random.default_rng(0)
            v = rng.standard_normal(self.n - self.n_slice)
            v /= np.linalg.norm(v)
            lam = 0.0
            for _ in range(n_iter):
                w = self.apply_x_tilde_t(self.apply_x_tilde(v))
                nw = np.linalg.norm(w)
                if nw == 0.0:
                    lam = 0.0
                    break
                v = w / nw
                if abs(nw - lam) <= tol * max(nw, 1.0):
                    lam = nw
                    break
                lam = nw
            self._lipschitz = float(lam)
        return self._lipschitz

    # -- dense helpers (small problems / tests only) -----------------------

    def dense_x(self) -> np.ndarray:
        return np.column_stack([self.apply_x(e) for e in np.eye(self.n)])

    def dense_x1(self) -> np.ndarray:
        m = self.n - self.n_slice
        return np.column_stack([self.apply_x1(e) for e in np.eye(m)])

    def dense_x_tilde(self) -> np.ndarray:
        m = self.n - self.n_slice
        return np.column_stack([self.apply_x_tilde(e) for e in np.eye(m)])


class SsrProblem:
    """One observed tensor bound to an :class:`SsrOperator`."""

    def __init__(self, op: SsrOperator, y):
        self.op = op
        if isinstance(y, Tensor3):
            if y.dims != op.dims:
                raise ShapeError(f"tensor dims {y.dims} != operator dims {op.dims}")
            self.tensor = y
            self.y = vec(y)
        else:
            y = np.asarray(y, dtype=float)
            if y.shape != (op.n,):
                raise ShapeError(f"y has length {y.shape}, expected {op.n}")
            self.y = y
            self.tensor = unvec(y, op.dims)
        self.y_star = self.y - op.apply_mean_projector(self.y)
        self.y_tilde = self.y_star - op.apply_p(self.y_star)
        # Gradient constant X_tilde' y_tilde, reused by every FISTA run.
        self.xty = op.apply_x_tilde_t(self.y_tilde)

    @classmethod
    def build(cls, y, bases: BasisSet) -> "SsrProblem":
        t = y if isinstance(y, Tensor3) else None
        dims = t.dims if t is not None else None
        if dims is None:
            raise ShapeError("pass a Tensor3 or use SsrProblem(SsrOperator(...), y)")
        return cls(SsrOperator(bases, dims), y)


def compute_y_star(problem: SsrProblem) -> np.ndarray:
    """Response with the smooth-mean column space projected out."""
    return problem.y_star


def solve_theta_m(problem: SsrProblem, theta_h: np.ndarray) -> np.ndarray:
    """Closed-form mean coefficients given the hot-spot coefficients.

    Least-squares solution of B_m theta_m ~ (y - B_h theta_h), computed
    factor-wise per mode.
    """
    theta_h = np.asarray(theta_h, dtype=float)
    if theta_h.shape != (problem.op.n,):
        raise ShapeError(f"theta_h has shape {theta_h.shape}, expected ({problem.op.n},)")
    resid = problem.y - problem.op.apply_hot_basis(theta_h)
    return problem.op.apply_mean_pinv(resid)


@dataclass
class LassoProblem:
    """Reduced plain-LASSO problem produced by the change of variables."""

    problem: SsrProblem

    @property
    def op(self) -> SsrOperator:
        return self.problem.op

    @property
    def y_tilde(self) -> np.ndarray:
        return self.problem.y_tilde

    @property
    def xty(self) -> np.ndarray:
        return self.problem.xty

    @property
    def n_beta1(self) -> int:
        return self.op.n - self.op.n_slice

    def apply_x_tilde(self, beta1: np.ndarray) -> np.ndarray:
        return self.op.apply_x_tilde(beta1)

    def apply_x_tilde_t(self, v: np.ndarray) -> np.ndarray:
        return self.op.apply_x_tilde_t(v)


def transform_to_lasso(problem: SsrProblem) -> LassoProblem:
    return LassoProblem(problem)


# -- objective evaluations (used by invariant tests and oracles) -----------


def objective_generalized(problem: SsrProblem, theta: np.ndarray, lambda2: float) -> float:
    """||y* - X theta||^2 + lambda2 ||D theta||_1."""
    r = problem.y_star - problem.op.apply_x(theta)
    return float(r @ r + lambda2 * np.abs(problem.op.d_op @ theta).sum())


def objective_reduced(
    problem: SsrProblem, beta1: np.ndarray, lambda2: float
) -> float:
    """||y_tilde - X_tilde beta1||^2 + lambda2 ||beta1||_1."""
    r = problem.y_tilde - problem.op.apply_x_tilde(beta1)
    return float(r @ r + lambda2 * np.abs(beta1).sum())


def objective_split(
    problem: SsrProblem, beta1: np.ndarray, beta2: np.ndarray, lambda2: float
) -> float:
    """||y* - X1 b1 - X2 b2||^2 + lambda2 ||b1||_1 (pre-elimination form)."""
    r = problem.y_star - problem.op.apply_x1(beta1) - problem.op.x2 @ beta2
    return float(r @ r + lambda2 * np.abs(beta1).sum())


def objective_full(
    problem: SsrProblem,
    theta_m: np.ndarray,
    theta_h: np.ndarray,
    lambda1: float,
    lambda2: float,
) -> float:
    """The original two-penalty objective on (theta_m, theta_h)."""
    e = (
        problem.y
        - problem.op.apply_mean_basis(theta_m)
        - problem.op.apply_hot_basis(theta_h)
    )
    return float(
        e @ e
        + lambda1 * np.abs(theta_h).sum()
        + lambda2 * np.abs(problem.op.d_op @ theta_h).sum()
    )
