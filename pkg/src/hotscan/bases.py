"""Construction of the per-mode basis matrices.

Six bases define the model: three for the smooth mean (spatial, category,
temporal) and three for the hot-spot component.  The spatial mean basis is
typically a Gaussian kernel matrix; hot-spot bases default to identities.
A clamped B-spline basis is provided for the synthetic data generator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import ConfigError, ShapeError
from .tensor3 import Identity, as_matrix

# Relative singular-value floor below which a basis Gram matrix is treated
# as rank deficient.
COND_TOL = 1e-10


@dataclass
class KernelConfig:
    """Bandwidth + pairwise distances for the Gaussian kernel spatial basis."""

    bandwidth: float
    distance_matrix: np.ndarray

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ConfigError(f"kernel bandwidth must be > 0, got {self.bandwidth}")
        d = np.asarray(self.distance_matrix, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ShapeError(f"distance matrix must be square, got shape {d.shape}")
        if not np.allclose(d, d.T):
            raise ConfigError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise ConfigError("distance matrix must have a zero diagonal")
        if np.any(d < 0):
            raise ConfigError("distance matrix entries must be nonnegative")
        self.distance_matrix = d


def gaussian_kernel_basis(cfg: KernelConfig) -> np.ndarray:
    """Kernel matrix with entries exp(-d(i,j)^2 / (2 c^2))."""
    d = cfg.distance_matrix
    c = cfg.bandwidth
    return np.exp(-(d**2) / (2.0 * c * c))


def line_distance_matrix(n: int) -> np.ndarray:
    """Distances |i - j| for n units on a line; the simulation default."""
    idx = np.arange(float(n))
    return np.abs(np.subtract.outer(idx, idx))


def identity_basis(n: int) -> Identity:
    """Symbolic identity basis; mode products with it are free."""
    return Identity(n)


def bspline_basis(n_points: int, degree: int = 3, n_knots: int = 10) -> np.ndarray:
    """Clamped uniform B-spline basis evaluated on an equispaced grid in [0,1].

    ``n_knots`` counts the distinct breakpoints including both endpoints, so
    the basis has q = n_knots + degree - 1 functions.  Rows are evaluation
    points; each row sums to 1.
    """
    if degree < 0 or n_knots < 2:
        raise ConfigError(f"need degree >= 0 and n_knots >= 2, got {degree}, {n_knots}")
    q = n_knots + degree - 1
    if n_points < q:
        raise ConfigError(f"need at least {q} evaluation points, got {n_points}")
    knots = np.concatenate(
        [np.zeros(degree), np.linspace(0.0, 1.0, n_knots), np.ones(degree)]
    )
    x = np.linspace(0.0, 1.0, n_points)
    return BSpline.design_matrix(x, knots, degree).toarray()


@dataclass
class BasisSet:
    """The six per-mode basis matrices (mean and hot-spot).

    Matrices may be dense arrays or :class:`Identity`.  By default every
    basis must be numerically full rank so that the Gram inverses of the
    closed-form mean solve exist.  Set ``allow_low_rank=True`` to accept
    rank-deficient bases (e.g. a wide-bandwidth Gaussian kernel, which is
    positive definite in exact arithmetic but numerically low rank); all
    solves then go through rank-truncated pseudoinverses and the mean
    projector becomes a genuine smoother rather than the identity.
    """

    b_ms: object
    b_mr: object
    b_mt: object
    b_hs: object
    b_hr: object
    b_ht: object
    allow_low_rank: bool = False
    rcond: float = 1e-8

    def __post_init__(self):
        for name in ("b_ms", "b_mr", "b_mt", "b_hs", "b_hr", "b_ht"):
            m = getattr(self, name)
            if isinstance(m, Identity):
                continue
            m = np.asarray(m, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ShapeError(f"basis {name} must be square, got shape {m.shape}")
            setattr(self, name, m)
            sv = np.linalg.svd(m, compute_uv=False)
            if sv[-1] <= COND_TOL * sv[0]:
                if self.allow_low_rank:
                    warnings.warn(
                        f"basis {name} is numerically rank deficient "
                        f"(min/max singular value {sv[-1] / sv[0]:.2e}); "
                        "using rank-truncated pseudoinverse",
                        stacklevel=2,
                    )
                else:
                    raise ConfigError(
                        f"basis {name} is numerically singular "
                        f"(min/max singular value {sv[-1] / sv[0]:.2e}); "
                        "pass allow_low_rank=True to accept a rank-deficient basis"
                    )

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.b_ms.shape[0], self.b_mr.shape[0], self.b_mt.shape[0])

    def check_dims(self, dims):
        n1, n2, n3 = dims
        expect = {
            "b_ms": n1, "b_hs": n1,
            "b_mr": n2, "b_hr": n2,
            "b_mt": n3, "b_ht": n3,
        }
        for name, n in expect.items():
            m = getattr(self, name)
            if m.shape != (n, n):
                raise ShapeError(
                    f"basis {name} has shape {m.shape}, expected ({n}, {n})"
                )

    def mean_mats(self):
        return (self.b_ms, self.b_mr, self.b_mt)

    def hot_mats(self):
        return (self.b_hs, self.b_hr, self.b_ht)


def default_bases(
    n1: int,
    n2: int,
    n3: int,
    bandwidth: float = 12.0,
    distance_matrix: np.ndarray | None = None,
    rcond: float = 1e-8,
) -> BasisSet:
    """Gaussian-kernel spatial mean basis, identities everywhere else."""
    if distance_matrix is None:
        distance_matrix = line_distance_matrix(n1)
    b_ms = gaussian_kernel_basis(KernelConfig(bandwidth, distance_matrix))
    return BasisSet(
        b_ms=b_ms,
        b_mr=identity_basis(n2),
        b_mt=identity_basis(n3),
        b_hs=identity_basis(n1),
        b_hr=identity_basis(n2),
        b_ht=identity_basis(n3),
        allow_low_rank=True,
        rcond=rcond,
    )


def dense_mean_basis(bases: BasisSet) -> np.ndarray:
    """Materialized Kronecker-chain mean basis (tests and small problems only)."""
    from .tensor3 import chain_kronecker

    return chain_kronecker(*(as_matrix(m) for m in bases.mean_mats()))


def dense_hot_basis(bases: BasisSet) -> np.ndarray:
    from .tensor3 import chain_kronecker

    return chain_kronecker(*(as_matrix(m) for m in bases.hot_mats()))
