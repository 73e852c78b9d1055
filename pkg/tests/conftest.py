import warnings

import numpy as np
import pytest

from hotscan.bases import BasisSet
from hotscan.model import SsrOperator, SsrProblem
from hotscan.tensor3 import Identity


def lowrank_square(n, rank, rng):
    """Square n x n matrix of the given (deficient) rank."""
    return rng.normal(size=(n, rank)) @ rng.normal(size=(rank, n))


def small_bases(rng, n1=3, n2=2, n3=4):
    """Basis set with a rank-deficient smooth-mean spatial factor.

    A full-rank square mean basis would project the response to zero, so the
    interesting regime for every downstream test is the deficient one.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return BasisSet(
            b_ms=lowrank_square(n1, max(1, n1 - 1), rng),
            b_mr=Identity(n2),
            b_mt=Identity(n3),
            b_hs=Identity(n1),
            b_hr=Identity(n2),
            b_ht=Identity(n3),
            allow_low_rank=True,
        )


def small_problem(rng, n1=3, n2=2, n3=4):
    bases = small_bases(rng, n1, n2, n3)
    op = SsrOperator(bases, (n1, n2, n3))
    y = rng.normal(size=n1 * n2 * n3)
    return SsrProblem(op, y)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
