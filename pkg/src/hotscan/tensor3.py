"""Order-3 tensor container and multilinear algebra kernel.

Conventions used throughout the package:

* A tensor has shape ``(n1, n2, n3)`` = (spatial units, categories, time).
* ``vec`` flattens in column-major order: the spatial index varies fastest,
  then the category index, then time.  Equivalently, flat index of entry
  ``(i, j, t)`` (0-based) is ``t*n1*n2 + j*n1 + i``.
* Under this ordering, ``vec(T x1 A x2 B x3 C) == kron(C, kron(B, A)) @ vec(T)``,
  which is verified by tests rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

N_MODES = 3


class Identity:
    """Symbolic n-by-n identity matrix; mode products with it are skipped."""

    def __init__(self, n: int):
        if n < 1:
            raise ShapeError(f"identity dimension must be >= 1, got {n}")
        self.n = n
        self.shape = (n, n)

    def as_matrix(self) -> np.ndarray:
        return np.eye(self.n)

    def __repr__(self):
        return f"Identity({self.n})"


def as_matrix(m) -> np.ndarray:
    """Materialize a matrix-like (ndarray or Identity) as a dense array."""
    if isinstance(m, Identity):
        return m.as_matrix()
    return np.asarray(m, dtype=float)


@dataclass(frozen=True)
class Tensor3:
    """Dense order-3 array of 64-bit floats.

    Immutable value type: all operations return new tensors.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != N_MODES:
            raise ShapeError(f"expected a 3-way array, got ndim={arr.ndim}")
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @classmethod
    def zeros(cls, dims) -> "Tensor3":
        return cls(np.zeros(dims))

    def __eq__(self, other):
        return isinstance(other, Tensor3) and np.array_equal(self.data, other.data)


def vec(t: Tensor3) -> np.ndarray:
    """Flatten a tensor to a vector (spatial index fastest, time slowest)."""
    return t.data.flatten(order="F")


def unvec(v: np.ndarray, dims) -> Tensor3:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=float)
    n = int(np.prod(dims))
    if v.shape != (n,):
        raise ShapeError(f"vector of length {v.shape} cannot fill dims {tuple(dims)}")
    return Tensor3(v.reshape(dims, order="F"))


def unfold(t: Tensor3, k: int) -> np.ndarray:
    """Mode-k unfolding: rows indexed by mode k, columns are mode-k fibers."""
    _check_mode(k)
    a = np.moveaxis(t.data, k - 1, 0)
    return a.reshape(t.dims[k - 1], -1, order="F")


def fold(m: np.ndarray, k: int, dims) -> Tensor3:
    """Inverse of :func:`unfold` for target dimensions ``dims``."""
    _check_mode(k)
    dims = tuple(dims)
    m = np.asarray(m, dtype=float)
    rest = [dims[q] for q in range(N_MODES) if q != k - 1]
    if m.shape != (dims[k - 1], int(np.prod(rest))):
        raise ShapeError(
            f"matrix of shape {m.shape} is not a mode-{k} unfolding of dims {dims}"
        )
    a = m.reshape([dims[k - 1]] + rest, order="F")
    return Tensor3(np.moveaxis(a, 0, k - 1))


def mode_product(t: Tensor3, m, k: int) -> Tensor3:
    """Contract matrix ``m`` with the tensor along mode ``k`` (1-based)."""
    _check_mode(k)
    if isinstance(m, Identity):
        if m.n != t.dims[k - 1]:
            raise ShapeError(
                f"mode-{k} product: identity of size {m.n} does not match "
                f"tensor dimension {t.dims[k - 1]}"
            )
        return t
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[1] != t.dims[k - 1]:
        raise ShapeError(
            f"mode-{k} product: matrix shape {m.shape} does not match "
            f"tensor dimension {t.dims[k - 1]}"
        )
    new_dims = list(t.dims)
    new_dims[k - 1] = m.shape[0]
    return fold(m @ unfold(t, k), k, new_dims)


def multi_mode_product(t: Tensor3, mats) -> Tensor3:
    """Apply one matrix per mode; ``None`` entries skip that mode."""
    out = t
    for k, m in enumerate(mats, start=1):
        if m is None:
            continue
        out = mode_product(out, m, k)
    return out


def kronecker(a, b) -> np.ndarray:
    """Kronecker product with Identity-aware materialization."""
    return np.kron(as_matrix(a), as_matrix(b))


def chain_kronecker(a, b, c) -> np.ndarray:
    """Kronecker chain K with ``K @ vec(T) == vec(T x1 a x2 b x3 c)``."""
    return kronecker(c, kronecker(b, a))


def _check_mode(k: int):
    if k not in (1, 2, 3):
        raise ShapeError(f"mode must be 1, 2 or 3, got {k}")
