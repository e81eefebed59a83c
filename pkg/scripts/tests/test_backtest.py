from dataclasses import replace

import numpy as np
import pytest

from backtest import (
    CellResult,
    EvalReport,
    LengthMismatch,
    NoFolds,
    ZeroMean,
    backtest,
    horizon_sweep,
    make_splits,
    rmse,
    rmse_over_mean,
)
from forecast import ForecastSpec, Method
from ingest import SynthSpec, generate
from series_core import FeatureFrame


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def test_make_splits_two_folds():
    plan = make_splits(150, 90, 30)
    assert plan.stride == 30
    assert [(f.train_start, f.train_stop, f.test_start, f.test_stop) for f in plan.folds] == [
        (0, 90, 90, 120), (30, 120, 120, 150)]
    assert plan.test_days == 60


def test_make_splits_single_fold_at_boundary():
    plan = make_splits(120)
    assert len(plan) == 1
    assert plan.folds[0].test == range(90, 120)


def test_make_splits_one_day_short():
    with pytest.raises(NoFolds):
        make_splits(119)


def test_make_splits_custom_stride():
    plan = make_splits(200, 90, 30, stride=10)
    assert len(plan) == 9
    for fold in plan.folds:
        assert fold.train_stop == fold.test_start
        assert len(fold.train) == 90 and len(fold.test) == 30
    with pytest.raises(NoFolds):
        make_splits(200, 90, 30, stride=0)


# ---------------------------------------------------------------------------
# metric
# ---------------------------------------------------------------------------

def test_rmse_over_mean_examples():
    assert rmse_over_mean([2, 2], [1, 3]) == 0.5
    assert rmse_over_mean([1, 2, 3], [2, 3, 4]) == 0.5
    assert rmse_over_mean([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert rmse([3, 4], [0, 0]) == pytest.approx(np.sqrt(12.5))


def test_rmse_over_mean_errors():
    with pytest.raises(ZeroMean):
        rmse_over_mean([1, -1], [0, 0])
    with pytest.raises(LengthMismatch):
        rmse_over_mean([1, 2], [1])
    with pytest.raises(LengthMismatch):
        rmse_over_mean([], [])


# ---------------------------------------------------------------------------
# backtest
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("method", ["mwa", "slr"])
def test_backtest_constant_is_exact(constant_frame, method):
    cell = backtest(constant_frame, ForecastSpec(method=method), make_splits(150))
    assert cell.rmse_over_mean < 1e-9
    assert cell.n_points == 60
    assert [f.count for f in cell.folds] == [30, 30]


def test_backtest_trend_slr_is_exact(trend_frame):
    for n in (1, 4, 7):
        cell = backtest(trend_frame, ForecastSpec(method="slr", horizon=n), make_splits(150))
        assert cell.rmse_over_mean < 1e-6


def test_backtest_trend_mwa_lags_behind(trend_frame):
    # a level forecast of a line is late by slope * (n + (W - 1) / 2)
    for n in (1, 3):
        cell = backtest(trend_frame, ForecastSpec(method="mwa", horizon=n), make_splits(150))
        assert cell.rmse == pytest.approx(0.01 * (n + 3), rel=1e-9)


def test_backtest_trace_covers_every_test_day(trend_frame):
    plan = make_splits(150)
    cell = backtest(trend_frame, ForecastSpec(method="slr", horizon=5), plan)
    expected = np.concatenate([trend_frame.dates[f.test_start:f.test_stop] for f in plan.folds])
    np.testing.assert_array_equal(cell.trace.dates, expected)
    np.testing.assert_array_equal(cell.trace.actual, trend_frame.rewards.values[90:150])


def test_backtest_pooling_consistency(noise_frame):
    cell = backtest(noise_frame, ForecastSpec(method="slr", horizon=2), make_splits(180, stride=20))
    pooled = cell.rmse ** 2 * cell.n_points
    assert pooled == pytest.approx(sum(f.rmse ** 2 * f.count for f in cell.folds), rel=1e-12)
    assert cell.mean_actual == pytest.approx(np.mean(cell.trace.actual))
    assert cell.rmse_over_mean == pytest.approx(cell.rmse / cell.mean_actual)


def test_backtest_is_deterministic(three_feed_frame):
    spec = ForecastSpec(method="mlr", horizon=3)
    plan = make_splits(len(three_feed_frame))
    assert backtest(three_feed_frame, spec, plan) == backtest(three_feed_frame, spec, plan)


@pytest.mark.parametrize("method", list(Method))
def test_backtest_no_leakage(three_feed_frame, method):
    plan = make_splits(len(three_feed_frame), stride=20)
    spec = ForecastSpec(method=method, horizon=4)
    rng = np.random.default_rng(8)
    for k, fold in enumerate(plan.folds):
        prefix = replace(plan, folds=plan.folds[:k + 1])
        parts = {}
        for name in three_feed_frame.features:
            values = three_feed_frame.series(name).values.copy()
            values[fold.test_stop:] = rng.normal(0, 1e3, len(values) - fold.test_stop)
            parts[name] = three_feed_frame.series(name).with_values(values)
        mutated = FeatureFrame(**parts)
        assert backtest(mutated, spec, prefix) == backtest(three_feed_frame, spec, prefix)


def test_backtest_series_mean_ignores_later_days(noise_frame):
    plan = make_splits(150)
    spec = ForecastSpec(method="mwa")
    short = backtest(noise_frame.slice(0, 150), spec, plan)
    full = backtest(noise_frame, spec, plan)
    assert full == short
    assert full.rmse_over_series_mean == pytest.approx(
        full.rmse / np.mean(noise_frame.rewards.values[:150]))


def test_backtest_rejects_plan_longer_than_frame(constant_frame):
    with pytest.raises(NoFolds):
        backtest(constant_frame.slice(0, 130), ForecastSpec(), make_splits(150))


# ---------------------------------------------------------------------------
# horizon sweep
# ---------------------------------------------------------------------------

def test_sweep_constant_all_zero(constant_frame):
    report = horizon_sweep(constant_frame, ["mwa", "slr"], range(1, 8))
    assert list(report.cells) == [(m, n) for m in (Method.MWA, Method.SLR) for n in range(1, 8)]
    assert all(c.ok and c.rmse_over_mean < 1e-9 for c in report.cells.values())


def test_sweep_mwa_degrades_on_ar1():
    frame = FeatureFrame(generate(SynthSpec(kind="ar1", level=1.0, phi=0.95, sigma=0.01,
                                            length=2000, seed=7)))
    report = horizon_sweep(frame, ["mwa"], range(1, 8))
    assert report.cell("mwa", 7).rmse_over_mean > report.cell("mwa", 1).rmse_over_mean
    assert report.degradation("mwa") > 0.05


def test_sweep_records_failed_cells(trend_frame):
    report = horizon_sweep(trend_frame, ["mwa", "mlr"], [1, 2])
    assert report.cell("mwa", 1).ok
    failed = report.cell("mlr", 2)
    assert not failed.ok
    assert failed.error == "MissingFeature price"
    assert failed.error_stage == "fit"
    assert failed.rmse_over_mean is None
    assert len(report.failures) == 2
    assert report.best_methods(1) == (Method.MWA,)


def test_sweep_too_short_series_fails_every_cell(constant_frame):
    report = horizon_sweep(constant_frame.slice(0, 119), ["mwa", "slr"], range(1, 8))
    assert report.plan is None
    assert len(report.failures) == 14
    assert all(c.error.startswith("NoFolds") for c in report.cells.values())


def test_sweep_parallel_matches_serial(noise_frame):
    serial = horizon_sweep(noise_frame, list(Method)[:2], range(1, 5))
    parallel = horizon_sweep(noise_frame, list(Method)[:2], range(1, 5), max_workers=4)
    assert serial == parallel
    assert list(serial.cells) == list(parallel.cells)


def test_sweep_scale_invariance(three_feed_frame):
    base = horizon_sweep(three_feed_frame, list(Method), [1, 3])
    for c in (0.01, 100.0):
        scaled = horizon_sweep(three_feed_frame.with_rewards(three_feed_frame.rewards.values * c),
                               list(Method), [1, 3])
        for key, cell in base.cells.items():
            assert scaled.cells[key].rmse_over_mean == pytest.approx(cell.rmse_over_mean, rel=1e-9)


def test_best_methods_reports_ties():
    a = CellResult(Method.MWA, 1, rmse_over_mean=0.0071)
    b = CellResult(Method.SLR, 1, rmse_over_mean=0.0068)
    report = EvalReport((Method.MWA, Method.SLR), (1,), {(Method.MWA, 1): a, (Method.SLR, 1): b})
    assert report.best_methods(1) == (Method.SLR,)
    assert report.best_methods(1, ndigits=2) == (Method.MWA, Method.SLR)


def test_degradation_and_records(trend_frame):
    report = horizon_sweep(trend_frame, ["mwa"], range(1, 8))
    # MWA lag on a line: error slope * (n + 3)
    assert report.degradation("mwa") == pytest.approx(10 / 4 - 1, rel=1e-6)
    records = report.to_records()
    assert [r["horizon"] for r in records] == list(range(1, 8))
    assert records[0]["method"] == "MWA"
    assert records[0]["n_points"] == 60
    assert records[0]["error"] is None


def test_sweep_mwa_on_white_noise_is_flat_across_horizons():
    # level forecast of iid noise: error sigma * sqrt(1 + 1/W) at every n
    frame = FeatureFrame(generate(SynthSpec(kind="ar1", level=1.0, phi=0.0, sigma=0.05,
                                            length=5000, seed=20210623)))
    report = horizon_sweep(frame, ["mwa"], range(1, 8))
    expected = 0.05 * np.sqrt(1 + 1 / 7)
    scores = [report.cell("mwa", n).rmse_over_mean for n in range(1, 8)]
    for score in scores:
        assert score == pytest.approx(expected, rel=0.10)
    assert max(scores) / min(scores) < 1.05
