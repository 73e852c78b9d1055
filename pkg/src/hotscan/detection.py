"""Turning per-time fits into alarms.

For every penalty pair in the grid, the upward shift statistic at time t is
the positive part of the estimated hot-spot slice projected onto the mean
residual.  Statistics are standardized against phase-I (in-control) moments
and maximized over the grid; a one-sided CUSUM on the maximized series
raises the alarm, and the fit behind the winning pair localizes it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np

from .bases import BasisSet
from .errors import ConfigError
from .model import SsrOperator, SsrProblem
from .solver import FistaConfig, LambdaGrid, SsrFit, fit, solve_theta_h0
from .tensor3 import Tensor3, unvec

MIN_PHASE1_SAMPLES = 30


@dataclass
class Phase1Reference:
    """In-control mean/variance per grid pair plus the scale of the max series."""

    pairs: list[tuple[float, float]]
    mean: dict[tuple[float, float], float]
    var: dict[tuple[float, float], float]
    n_samples: int
    p_tilde_sd: float
    p_tilde_mean: float = 0.0

    def __post_init__(self):
        if self.n_samples < MIN_PHASE1_SAMPLES:
            warnings.warn(
                f"phase-I reference built from only {self.n_samples} samples "
                f"(< {MIN_PHASE1_SAMPLES})",
                stacklevel=2,
            )
        bad = [p for p in self.pairs if self.var.get(p, 0.0) <= 0.0]
        if bad:
            raise ConfigError(
                f"phase-I variance is zero for grid pairs {bad}; the statistic "
                "is degenerate there (hot-spot estimate always empty?)"
            )


@dataclass(frozen=True)
class MonitorState:
    """Snapshot of the control chart after one time step."""

    t: int
    p_tilde: float
    lambda_star: tuple[float, float]
    w: float
    alarmed: bool
    control_limit: float
    drift: float


@dataclass
class HotspotReport:
    """Localized hot-spot entries at the alarm time."""

    t_star: int
    entries: list[tuple[int, int, float]]  # (spatial index, category index, magnitude)

    @property
    def support(self) -> set[tuple[int, int]]:
        return {(i, j) for i, j, _ in self.entries}


def test_statistic_up(h_hat_t: np.ndarray, r_t: np.ndarray) -> float:
    """Upward statistic: positive hot-spot part projected onto the residual.

    Returns 0 when the positive part is identically zero (no evidence of an
    upward shift), avoiding the 0/0 form.
    """
    h_hat_t = np.asarray(h_hat_t, dtype=float)
    r_t = np.asarray(r_t, dtype=float)
    hp = np.maximum(h_hat_t, 0.0)
    norm2 = hp @ hp
    if norm2 == 0.0:
        return 0.0
    return float(hp @ r_t / np.sqrt(norm2))


def standardize_and_select(
    stats: dict[tuple[float, float], float], ref: Phase1Reference
) -> tuple[float, tuple[float, float]]:
    """Max standardized statistic over the grid, with its argmax pair.

    Ties are broken by first occurrence in the grid order.
    """
    best = None
    best_pair = None
    for pair in ref.pairs:
        if pair not in stats:
            raise ConfigError(f"no statistic supplied for grid pair {pair}")
        z = (stats[pair] - ref.mean[pair]) / np.sqrt(ref.var[pair])
        if best is None or z > best:
            best, best_pair = z, pair
    return float(best), best_pair


def cusum_step(
    prev: MonitorState | None, p_tilde: float, d: float, limit: float, t: int | None = None,
    lambda_star: tuple[float, float] = (0.0, 0.0),
) -> MonitorState:
    """One step of the one-sided CUSUM recursion, starting from W = 0."""
    w_prev = 0.0 if prev is None else prev.w
    w = max(0.0, w_prev + p_tilde - d)
    if t is None:
        t = 1 if prev is None else prev.t + 1
    return MonitorState(
        t=t,
        p_tilde=p_tilde,
        lambda_star=lambda_star,
        w=w,
        alarmed=w > limit,
        control_limit=limit,
        drift=d,
    )


def _slice(v: np.ndarray, t: int, n_slice: int) -> np.ndarray:
    return v[(t - 1) * n_slice : t * n_slice]


def grid_fits(
    problem: SsrProblem, grid: LambdaGrid, cfg: FistaConfig | None = None
) -> dict[tuple[float, float], SsrFit]:
    """Fit every grid pair, sharing the FISTA solve across equal lambda2."""
    fits: dict[tuple[float, float], SsrFit] = {}
    for l2 in grid.lambda2_values:
        theta_h0 = solve_theta_h0(problem, l2, cfg)
        for l1, l2p in grid:
            if l2p == l2:
                fits[(l1, l2p)] = fit(problem, l1, l2p, cfg, theta_h0=theta_h0)
    return fits


def statistic_series(
    fits: dict[tuple[float, float], SsrFit], dims
) -> dict[tuple[float, float], np.ndarray]:
    """Per-pair series of upward statistics over t = 1..n3."""
    n1, n2, n3 = dims
    n_slice = n1 * n2
    out = {}
    for pair, f in fits.items():
        r = f.residual + f.h_hat  # r_t = y_t - mu_t
        out[pair] = np.array(
            [
                test_statistic_up(_slice(f.h_hat, t, n_slice), _slice(r, t, n_slice))
                for t in range(1, n3 + 1)
            ]
        )
    return out


def build_phase1_reference(
    op: SsrOperator,
    in_control: list[Tensor3],
    grid: LambdaGrid,
    cfg: FistaConfig | None = None,
) -> Phase1Reference:
    """Estimate per-pair null moments from in-control observations.

    Every time step of every in-control tensor contributes one sample per
    grid pair.  The standard deviation of the standardized-max series over
    the same data sets the scale of the control limit.
    """
    if not in_control:
        raise ConfigError("phase-I needs at least one in-control observation")
    samples: dict[tuple[float, float], list[np.ndarray]] = {p: [] for p in grid}
    for tensor in in_control:
        problem = SsrProblem(op, tensor)
        series = statistic_series(grid_fits(problem, grid, cfg), op.dims)
        for pair, vals in series.items():
            samples[pair].append(vals)
    pooled = {p: np.concatenate(v) for p, v in samples.items()}
    n_samples = len(next(iter(pooled.values())))
    mean = {p: float(np.mean(v)) for p, v in pooled.items()}
    var = {p: float(np.var(v, ddof=1)) for p, v in pooled.items()}
    ref = Phase1Reference(
        pairs=list(grid),
        mean=mean,
        var=var,
        n_samples=n_samples,
        p_tilde_sd=1.0,  # placeholder until the max series is standardized
    )
    p_tilde = [
        standardize_and_select({p: pooled[p][i] for p in grid}, ref)[0]
        for i in range(n_samples)
    ]
    ref.p_tilde_sd = float(np.std(p_tilde, ddof=1))
    ref.p_tilde_mean = float(np.mean(p_tilde))
    return ref


@dataclass
class MonitorResult:
    states: list[MonitorState]
    first_alarm: int | None
    fits: dict[tuple[float, float], SsrFit]
    control_limit: float


def monitor(
    data: Tensor3,
    op: SsrOperator | BasisSet,
    grid: LambdaGrid,
    ref: Phase1Reference,
    drift: float | None = None,
    drift_allowance: float = 2.0,
    limit_multiplier: float = 4.0,
    control_limit: float | None = None,
    cfg: FistaConfig | None = None,
) -> MonitorResult:
    """Run the full chart over one observed tensor.

    The control limit defaults to ``limit_multiplier`` times the phase-I
    standard deviation of the standardized-max series.  When ``drift`` is
    None it is set to the phase-I mean of that series plus
    ``drift_allowance``: the max over the grid has a positive null mean, so
    the classic allowance must sit on top of it for the chart to be stable
    in control.
    """
    if isinstance(op, BasisSet):
        op = SsrOperator(op, data.dims)
    if drift is None:
        drift = ref.p_tilde_mean + drift_allowance
    limit = (
        float(control_limit)
        if control_limit is not None
        else limit_multiplier * ref.p_tilde_sd
    )
    problem = SsrProblem(op, data)
    fits = grid_fits(problem, grid, cfg)
    series = statistic_series(fits, op.dims)
    n3 = op.dims[2]
    states: list[MonitorState] = []
    first_alarm = None
    prev = None
    for t in range(1, n3 + 1):
        p_tilde, pair = standardize_and_select(
            {p: series[p][t - 1] for p in grid}, ref
        )
        state = cusum_step(prev, p_tilde, drift, limit, t=t, lambda_star=pair)
        states.append(state)
        if state.alarmed and first_alarm is None:
            first_alarm = t
        prev = state
    return MonitorResult(
        states=states, first_alarm=first_alarm, fits=fits, control_limit=limit
    )


def localize(fit_at_alarm: SsrFit, t_star: int, dims) -> HotspotReport:
    """Report the strictly positive hot-spot entries at the alarm time."""
    h_tensor = unvec(fit_at_alarm.h_hat, dims)
    sl = h_tensor.data[:, :, t_star - 1]
    idx = np.argwhere(sl > 0.0)
    entries = [(int(i), int(j), float(sl[i, j])) for i, j in idx]
    return HotspotReport(t_star=t_star, entries=entries)
