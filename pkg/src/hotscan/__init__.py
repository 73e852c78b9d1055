"""Spatio-temporal hot-spot decomposition, detection and localization.

A 3-way panel (space x category x time) is decomposed into a smooth
background mean, sparse temporally-persistent hot-spots and noise; a
standardized CUSUM chart over a penalty grid detects when the hot-spots
appear and the sparse component localizes them.
"""

__version__ = "0.1.0"

from .bases import (
    BasisSet,
    KernelConfig,
    bspline_basis,
    default_bases,
    gaussian_kernel_basis,
    identity_basis,
)
from .detection import (
    HotspotReport,
    MonitorState,
    Phase1Reference,
    cusum_step,
    localize,
    monitor,
    standardize_and_select,
    test_statistic_up,
)
from .model import SsrOperator, SsrProblem, transform_to_lasso
from .simulation import DetectorConfig, MetricsReport, SimConfig, generate, run_experiment, smse
from .solver import FistaConfig, LambdaGrid, SsrFit, fista_solve, fit, lambda1_path, soft_threshold
from .tensor3 import Tensor3, fold, kronecker, mode_product, unfold, unvec, vec

__all__ = [
    "BasisSet",
    "DetectorConfig",
    "FistaConfig",
    "HotspotReport",
    "KernelConfig",
    "LambdaGrid",
    "MetricsReport",
    "MonitorState",
    "Phase1Reference",
    "SimConfig",
    "SsrFit",
    "SsrOperator",
    "SsrProblem",
    "Tensor3",
    "bspline_basis",
    "cusum_step",
    "default_bases",
    "fista_solve",
    "fit",
    "fold",
    "gaussian_kernel_basis",
    "generate",
    "identity_basis",
    "kronecker",
    "lambda1_path",
    "localize",
    "mode_product",
    "monitor",
    "run_experiment",
    "smse",
    "soft_threshold",
    "standardize_and_select",
    "test_statistic_up",
    "transform_to_lasso",
    "unfold",
    "unvec",
    "vec",
]
