import warnings

import numpy as np
import pytest

from hotscan.bases import default_bases
from hotscan.detection import (
    HotspotReport,
    Phase1Reference,
    build_phase1_reference,
    cusum_step,
    grid_fits,
    localize,
    monitor,
    standardize_and_select,
    statistic_series,
    test_statistic_up as statistic_up,
)
from hotscan.errors import ConfigError
from hotscan.model import SsrOperator, SsrProblem
from hotscan.solver import FistaConfig, LambdaGrid
from hotscan.tensor3 import Tensor3

DIMS = (6, 2, 8)
GRID = LambdaGrid.cross([0.01, 0.05], [0.02, 0.1])


def small_op():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bases = default_bases(*DIMS, bandwidth=12.0)
        return SsrOperator(bases, DIMS)


def in_control_tensor(rng, dims=DIMS):
    n1, n2, n3 = dims
    data = 1.0 + 0.1 * rng.normal(size=(n1, n2, n3))
    return Tensor3(data)


def shifted_tensor(rng, delta, change_at, cells, dims=DIMS):
    t = in_control_tensor(rng, dims).data.copy()
    for (i, j) in cells:
        t[i, j, change_at - 1:] += delta
    return Tensor3(t)


def test_statistic_zero_convention():
    assert statistic_up(np.array([-1.0, 0.0]), np.array([5.0, 5.0])) == 0.0


def test_statistic_hand_value():
    h = np.array([3.0, -1.0, 4.0])
    r = np.array([1.0, 2.0, 3.0])
    hp = np.array([3.0, 0.0, 4.0])
    want = hp @ r / np.sqrt(hp @ hp)
    assert statistic_up(h, r) == pytest.approx(want)


def make_ref(pairs, mean, var, sd=1.0, n=100):
    return Phase1Reference(
        pairs=pairs,
        mean=dict(zip(pairs, mean)),
        var=dict(zip(pairs, var)),
        n_samples=n,
        p_tilde_sd=sd,
    )


def test_standardize_and_select_max_and_ties():
    pairs = [(0.1, 0.1), (0.2, 0.2), (0.3, 0.3)]
    ref = make_ref(pairs, mean=[0.0, 0.0, 0.0], var=[1.0, 4.0, 1.0])
    stats = {pairs[0]: 2.0, pairs[1]: 6.0, pairs[2]: 2.0}
    z, best = standardize_and_select(stats, ref)
    assert z == pytest.approx(3.0)
    assert best == pairs[1]
    # exact tie goes to the first pair in grid order
    stats = {p: 1.0 for p in pairs}
    stats[pairs[1]] = 2.0  # standardized to 1.0 as well
    z, best = standardize_and_select(stats, ref)
    assert best == pairs[0]


def test_standardize_missing_pair_raises():
    pairs = [(0.1, 0.1)]
    ref = make_ref(pairs, mean=[0.0], var=[1.0])
    with pytest.raises(ConfigError):
        standardize_and_select({}, ref)


def test_phase1_zero_variance_rejected():
    pairs = [(0.1, 0.1), (0.2, 0.2)]
    with pytest.raises(ConfigError, match=r"\(0.2, 0.2\)"):
        make_ref(pairs, mean=[0.0, 0.0], var=[1.0, 0.0])


def test_phase1_small_sample_warns():
    with pytest.warns(UserWarning, match="phase-I"):
        make_ref([(0.1, 0.1)], mean=[0.0], var=[1.0], n=5)


def test_cusum_recursion():
    s1 = cusum_step(None, 2.0, 0.5, limit=4.0)
    assert s1.t == 1 and s1.w == pytest.approx(1.5) and not s1.alarmed
    s2 = cusum_step(s1, 3.5, 0.5, limit=4.0)
    assert s2.t == 2 and s2.w == pytest.approx(4.5) and s2.alarmed
    s3 = cusum_step(s2, -10.0, 0.5, limit=4.0)
    assert s3.w == 0.0  # clipped at zero


def test_monitor_detects_injected_shift():
    op = small_op()
    rng = np.random.default_rng(5)
    cfg = FistaConfig(max_iter=300, tol=1e-8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ref = build_phase1_reference(
            op, [in_control_tensor(rng) for _ in range(5)], GRID, cfg
        )
    assert ref.p_tilde_sd > 0
    cells = [(1, 0), (2, 0), (1, 1)]
    data = shifted_tensor(rng, delta=2.0, change_at=4, cells=cells)
    res = monitor(data, op, GRID, ref, cfg=cfg)
    assert res.first_alarm is not None
    # the retrospective fit smooths over time, so the alarm may lead the
    # change point by a step or two but not sit far after it
    assert res.first_alarm <= 6
    t_loc = max(res.first_alarm, 4)
    state = res.states[res.first_alarm - 1]
    report = localize(res.fits[state.lambda_star], t_loc, DIMS)
    # localization is noisy at this scale; most of the true cells must show
    assert len(set(cells) & report.support) >= 2


def test_monitor_quiet_in_control():
    op = small_op()
    rng = np.random.default_rng(6)
    cfg = FistaConfig(max_iter=300, tol=1e-8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ref = build_phase1_reference(
            op, [in_control_tensor(rng) for _ in range(5)], GRID, cfg
        )
    res = monitor(in_control_tensor(rng), op, GRID, ref, cfg=cfg)
    assert res.first_alarm is None


def test_statistic_series_shapes():
    op = small_op()
    rng = np.random.default_rng(7)
    problem = SsrProblem(op, in_control_tensor(rng))
    fits = grid_fits(problem, GRID, FistaConfig(max_iter=100))
    series = statistic_series(fits, DIMS)
    assert set(series) == set(GRID.pairs)
    assert all(v.shape == (DIMS[2],) for v in series.values())


def test_localize_reports_positive_entries_only():
    h = np.zeros(np.prod(DIMS))
    t3 = np.zeros(DIMS)
    t3[2, 1, 4] = 0.7
    t3[3, 0, 4] = -0.5
    h = t3.reshape(-1, order="F")
    fit_like = type("F", (), {"h_hat": h})()
    report = localize(fit_like, 5, DIMS)
    assert report.support == {(2, 1)}
    assert report.entries[0][2] == pytest.approx(0.7)


def test_hotspot_report_support():
    r = HotspotReport(t_star=3, entries=[(0, 1, 0.5), (2, 0, 0.1)])
    assert r.support == {(0, 1), (2, 0)}
