"""Synthetic data generation and Monte-Carlo experiments.

Data model: at each time step the observed slice is a smooth background
(B-spline basis times a random coefficient vector), plus a constant upward
shift of magnitude delta on a fixed sparse index set after the change time,
plus white noise.  Experiments replay the full detection pipeline over many
replications and aggregate localization and delay metrics.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .bases import BasisSet, bspline_basis, default_bases
from .detection import build_phase1_reference, localize, monitor
from .errors import ConfigError, ShapeError
from .model import SsrOperator
from .solver import FistaConfig, LambdaGrid
from .tensor3 import Tensor3

# Flat (1-based, spatial index fastest) hot-spot locations used by default:
# six spatially contiguous triples spread over the three categories.
DEFAULT_HOTSPOTS = (
    3, 4, 5, 45, 46, 47, 57, 58, 59, 77, 78, 79, 119, 120, 121, 137, 138, 139,
)

MISS_DELAY = 30  # recorded delay when no alarm is raised within the horizon

SCENARIO_STATIONARY = 1
SCENARIO_DECREASING = 2


@dataclass
class SimConfig:
    n1: int = 48
    n2: int = 3
    n_time: int = 50
    tau: int = 20
    delta: float = 0.1
    hotspots: tuple[int, ...] = DEFAULT_HOTSPOTS
    scenario: int = SCENARIO_STATIONARY
    noise_sd: float = 0.1
    theta_sd: float = 0.1
    spline_degree: int = 3
    spline_knots: int = 10
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.tau <= self.n_time):
            raise ConfigError(f"tau must be in [1, {self.n_time}], got {self.tau}")
        if self.delta < 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if self.scenario not in (SCENARIO_STATIONARY, SCENARIO_DECREASING):
            raise ConfigError(f"scenario must be 1 or 2, got {self.scenario}")
        n = self.n1 * self.n2
        for s in self.hotspots:
            if not (1 <= s <= n):
                raise ConfigError(f"hot-spot index {s} outside [1, {n}]")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n_time)

    def hotspot_support(self) -> set[tuple[int, int]]:
        """0-based (spatial, category) pairs of the true hot-spots."""
        return {((s - 1) % self.n1, (s - 1) // self.n1) for s in self.hotspots}


@dataclass
class SimTruth:
    mu_true: np.ndarray  # (n1*n2, n_time), background only
    hotspot_support: set[tuple[int, int]]
    tau: int


def theta_mean(cfg: SimConfig, t: int) -> float:
    """Background coefficient mean at (1-based) time t."""
    if cfg.scenario == SCENARIO_STATIONARY:
        return 1.0
    return 0.95 ** (t - 1)


def generate(cfg: SimConfig, rng: np.random.Generator | None = None):
    """Draw one replication; returns (Tensor3, SimTruth)."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    n = cfg.n1 * cfg.n2
    basis = bspline_basis(n, cfg.spline_degree, cfg.spline_knots)
    q = basis.shape[1]
    shift = np.zeros(n)
    if cfg.delta > 0:
        shift[[s - 1 for s in cfg.hotspots]] = cfg.delta
    mu = np.empty((n, cfg.n_time))
    data = np.empty((cfg.n1, cfg.n2, cfg.n_time))
    for t in range(1, cfg.n_time + 1):
        theta_t = rng.normal(theta_mean(cfg, t), cfg.theta_sd, size=q)
        mu[:, t - 1] = basis @ theta_t
        y_t = mu[:, t - 1] + rng.normal(0.0, cfg.noise_sd, size=n)
        if t >= cfg.tau:
            y_t = y_t + shift
        data[:, :, t - 1] = y_t.reshape((cfg.n1, cfg.n2), order="F")
    support = cfg.hotspot_support() if cfg.delta > 0 else set()
    return Tensor3(data), SimTruth(mu_true=mu, hotspot_support=support, tau=cfg.tau)


def score_localization(reported: set, truth: set):
    """Precision, recall and both F-variants for a reported support set.

    Returns (precision, recall, f_harmonic, f_arithmetic, degenerate) where
    the flag marks the conventions: no detections give precision 0, and an
    empty report against an empty truth counts as perfect.
    """
    reported = set(reported)
    truth = set(truth)
    if not reported and not truth:
        return 1.0, 1.0, 1.0, 1.0, True
    tp = len(reported & truth)
    precision = tp / len(reported) if reported else 0.0
    recall = tp / len(truth) if truth else 1.0
    degenerate = not reported
    f_h = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    f_a = 0.5 * (precision + recall)
    return precision, recall, f_h, f_a, degenerate


def smse(mu_hat, mu_true) -> float:
    """Root mean squared error between fitted and true background."""
    mu_hat = np.asarray(mu_hat, dtype=float)
    mu_true = np.asarray(mu_true, dtype=float)
    if mu_hat.size != mu_true.size:
        raise ShapeError(
            f"mu_hat has {mu_hat.size} entries, mu_true has {mu_true.size}"
        )
    d = mu_hat.ravel() - mu_true.ravel()
    return float(np.sqrt(np.mean(d * d)))


@dataclass
class DetectorConfig:
    """Everything the detection pipeline needs beyond the lambda grid."""

    bandwidth: float = 12.0
    rcond: float = 1e-8
    drift: float | None = None  # None: phase-I mean of the max series + allowance
    drift_allowance: float = 2.0
    limit_multiplier: float = 4.0
    phase1_reps: int = 10
    fista: FistaConfig = field(default_factory=FistaConfig)

    def __post_init__(self):
        if self.phase1_reps < 1:
            raise ConfigError(f"phase1_reps must be >= 1, got {self.phase1_reps}")


def default_grid() -> LambdaGrid:
    return LambdaGrid.cross([0.005, 0.01, 0.02], [0.05, 0.1, 0.3])


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f_measure_harmonic: float
    f_measure_arithmetic: float
    arl1_mean: float
    arl1_sd: float
    smse_mean: float
    smse_sd: float
    alarm_rate: float
    replications: int
    failures: int
    per_rep: list[dict] = field(repr=False, default_factory=list)

    def summary_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f_measure_harmonic": self.f_measure_harmonic,
            "f_measure_arithmetic": self.f_measure_arithmetic,
            "arl1_mean": self.arl1_mean,
            "arl1_sd": self.arl1_sd,
            "smse_mean": self.smse_mean,
            "smse_sd": self.smse_sd,
            "alarm_rate": self.alarm_rate,
            "replications": self.replications,
            "failures": self.failures,
        }


def n_jobs() -> int:
    """Parallelism cap from the SSR_THREADS environment variable."""
    try:
        return max(1, int(os.environ.get("SSR_THREADS", "1")))
    except ValueError:
        return 1


def experiment_operator(cfg: SimConfig, det: DetectorConfig) -> SsrOperator:
    """The model operator shared by every replication of an experiment."""
    bases = default_bases(
        cfg.n1, cfg.n2, cfg.n_time, bandwidth=det.bandwidth, rcond=det.rcond
    )
    return SsrOperator(bases, cfg.dims)


def phase1_reference(
    cfg: SimConfig,
    grid: LambdaGrid,
    det: DetectorConfig,
    op: SsrOperator,
    seed_seq: np.random.SeedSequence,
):
    """In-control reference from dedicated delta = 0 replications."""
    base = SimConfig(**{**cfg.__dict__, "delta": 0.0, "tau": 1})
    seeds = seed_seq.spawn(det.phase1_reps)
    tensors = [
        generate(base, np.random.default_rng(s))[0] for s in seeds
    ]
    return build_phase1_reference(op, tensors, grid, det.fista)


def run_replication(
    cfg: SimConfig,
    grid: LambdaGrid,
    det: DetectorConfig,
    op: SsrOperator,
    ref,
    rng: np.random.Generator,
) -> dict:
    """One generate -> monitor -> localize -> score pass (change at tau)."""
    data, truth = generate(cfg, rng)
    result = monitor(
        data,
        op,
        grid,
        ref,
        drift=det.drift,
        drift_allowance=det.drift_allowance,
        limit_multiplier=det.limit_multiplier,
        cfg=det.fista,
    )
    alarmed = result.first_alarm is not None
    if alarmed:
        t_star = result.first_alarm
        state = result.states[t_star - 1]
        sel = result.fits[state.lambda_star]
        report = localize(sel, t_star, op.dims)
        prec, rec, f_h, f_a, degen = score_localization(
            report.support, truth.hotspot_support
        )
        delay = t_star - cfg.tau + 1
        lambda_star = state.lambda_star
    else:
        sel = result.fits[grid.pairs[0]]
        prec = rec = f_h = f_a = 0.0
        degen = True
        delay = MISS_DELAY
        lambda_star = (np.nan, np.nan)
    mu_hat = sel.mu_hat.reshape((op.n_slice, op.dims[2]), order="F")
    return {
        "alarmed": alarmed,
        "delay": int(delay),
        "precision": prec,
        "recall": rec,
        "f_harmonic": f_h,
        "f_arithmetic": f_a,
        "degenerate": degen,
        "smse": smse(mu_hat, truth.mu_true),
        "lambda1_star": lambda_star[0],
        "lambda2_star": lambda_star[1],
    }


def run_experiment(
    cfg: SimConfig,
    grid: LambdaGrid | None = None,
    det: DetectorConfig | None = None,
    reps: int = 100,
    change_at: int | None = 1,
) -> MetricsReport:
    """Monte-Carlo experiment: phase-I calibration, then ``reps`` monitored runs.

    ``change_at`` overrides the change time of the monitored replications
    (the delay metric assumes a change at t = 1); pass None to keep
    ``cfg.tau``.  With delta = 0 the runs are pure noise and only the alarm
    rate is meaningful.
    """
    if reps < 1:
        raise ConfigError(f"reps must be >= 1, got {reps}")
    grid = grid or default_grid()
    det = det or DetectorConfig()
    if change_at is not None:
        cfg = SimConfig(**{**cfg.__dict__, "tau": change_at})
    op = experiment_operator(cfg, det)
    root = np.random.SeedSequence(cfg.seed)
    phase1_seq, rep_seq = root.spawn(2)
    ref = phase1_reference(cfg, grid, det, op, phase1_seq)
    rows: list[dict] = []
    failures = 0
    for i, s in enumerate(rep_seq.spawn(reps)):
        try:
            row = run_replication(cfg, grid, det, op, ref, np.random.default_rng(s))
        except Exception:  # noqa: BLE001 - replication failures are counted
            failures += 1
            continue
        row["rep"] = i
        rows.append(row)
    if not rows:
        raise ConfigError("every replication failed")
    arr = lambda key: np.array([r[key] for r in rows], dtype=float)
    scored = [r for r in rows if r["alarmed"]]
    sarr = lambda key: (
        np.array([r[key] for r in scored]) if scored else np.array([0.0])
    )
    return MetricsReport(
        precision=float(np.mean(sarr("precision"))),
        recall=float(np.mean(sarr("recall"))),
        f_measure_harmonic=float(np.mean(sarr("f_harmonic"))),
        f_measure_arithmetic=float(np.mean(sarr("f_arithmetic"))),
        arl1_mean=float(np.mean(arr("delay"))),
        arl1_sd=float(np.std(arr("delay"), ddof=1)) if len(rows) > 1 else 0.0,
        smse_mean=float(np.mean(arr("smse"))),
        smse_sd=float(np.std(arr("smse"), ddof=1)) if len(rows) > 1 else 0.0,
        alarm_rate=float(np.mean(arr("alarmed"))),
        replications=len(rows),
        failures=failures,
        per_rep=rows,
    )
