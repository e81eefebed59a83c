#!/usr/bin/env python3
"""
Walk-Forward Backtesting
========================

Rolling evaluation of the forecasters: fit on 90 days, test on the next 30,
advance by one test block, repeat.  Reported metric is RMSE divided by the
mean of the pooled actual test values.

Inside a test block every day is a target.  The first origins of a block sit
at the tail of the training range (origin = target - n), so no test day is
skipped; a prediction only ever sees data in [fold start, origin].
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from forecast import ForecastSpec, Method, fit_direct, predict_at
from series_core import FeatureFrame, StakingError

logger = logging.getLogger(__name__)

DEFAULT_TRAIN = 90
DEFAULT_TEST = 30


class NoFolds(StakingError):
    stage = "eval"


class ZeroMean(StakingError):
    stage = "eval"


class LengthMismatch(StakingError):
    stage = "eval"


# ============================================================================
# SPLITS
# ============================================================================

@dataclass(frozen=True)
class Fold:
    index: int
    train_start: int
    train_stop: int
    test_start: int
    test_stop: int

    @property
    def train(self) -> range:
        return range(self.train_start, self.train_stop)

    @property
    def test(self) -> range:
        return range(self.test_start, self.test_stop)


@dataclass(frozen=True)
class SplitPlan:
    train_len: int
    test_len: int
    stride: int
    series_len: int
    folds: Tuple[Fold, ...]

    def __len__(self) -> int:
        return len(self.folds)

    @property
    def test_days(self) -> int:
        return sum(f.test_stop - f.test_start for f in self.folds)


def make_splits(series_len: int,
                train_len: int = DEFAULT_TRAIN,
                test_len: int = DEFAULT_TEST,
                stride: Optional[int] = None) -> SplitPlan:
    """
    Fold k trains on [k*stride, k*stride + train_len) and tests on the
    following test_len days; only folds fully inside the series are kept.
    """
    stride = test_len if stride is None else stride
    for label, value in (("train_len", train_len), ("test_len", test_len), ("stride", stride)):
        if value < 1:
            raise NoFolds(f"{label} must be >= 1, got {value}")
    if series_len < train_len + test_len:
        raise NoFolds(f"series of {series_len} days is shorter than "
                      f"{train_len} train + {test_len} test days")

    folds = []
    k = 0
    while k * stride + train_len + test_len <= series_len:
        start = k * stride
        folds.append(Fold(k, start, start + train_len, start + train_len, start + train_len + test_len))
        k += 1
    logger.debug("make_splits: %d folds over %d days", len(folds), series_len)
    return SplitPlan(train_len, test_len, stride, series_len, tuple(folds))


# ============================================================================
# METRIC
# ============================================================================

def rmse(actual: Sequence[float], predicted: Sequence[float]) -> float:
    actual, predicted = _paired(actual, predicted)
    return float(np.sqrt(np.mean((actual - predicted) ** 2)))


def rmse_over_mean(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """sqrt(mean((a - p)^2)) / |mean(a)|"""
    actual, predicted = _paired(actual, predicted)
    mean = float(np.mean(actual))
    if mean == 0:
        raise ZeroMean("mean of actual values is zero")
    return rmse(actual, predicted) / abs(mean)


def _paired(actual, predicted) -> Tuple[np.ndarray, np.ndarray]:
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if actual.shape != predicted.shape or actual.ndim != 1:
        raise LengthMismatch(f"{actual.shape} actual vs {predicted.shape} predicted")
    if actual.size == 0:
        raise LengthMismatch("no values to score")
    return actual, predicted


# ============================================================================
# REPORT TYPES
# ============================================================================

@dataclass(frozen=True)
class FoldScore:
    fold: int
    rmse: float
    mean_actual: float
    count: int


@dataclass(frozen=True, eq=False)
class Trace:
    dates: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True, eq=False)
class CellResult:
    """Backtest outcome of one (method, horizon) pair."""

    method: Method
    horizon: int
    rmse_over_mean: Optional[float] = None
    rmse: Optional[float] = None
    mean_actual: Optional[float] = None
    rmse_over_series_mean: Optional[float] = None
    folds: Tuple[FoldScore, ...] = ()
    trace: Optional[Trace] = None
    error: Optional[str] = None
    error_stage: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def n_points(self) -> int:
        return 0 if self.trace is None else len(self.trace)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CellResult):
            return NotImplemented
        same_trace = (self.trace is None and other.trace is None) or (
            self.trace is not None and other.trace is not None
            and np.array_equal(self.trace.dates, other.trace.dates)
            and np.array_equal(self.trace.actual, other.trace.actual)
            and np.array_equal(self.trace.predicted, other.trace.predicted))
        return (self.method, self.horizon, self.rmse_over_mean, self.rmse, self.mean_actual,
                self.rmse_over_series_mean, self.folds, self.error) == (
                other.method, other.horizon, other.rmse_over_mean, other.rmse, other.mean_actual,
                other.rmse_over_series_mean, other.folds, other.error) and same_trace

    __hash__ = None


@dataclass(frozen=True, eq=False)
class EvalReport:
    methods: Tuple[Method, ...]
    horizons: Tuple[int, ...]
    cells: Dict[Tuple[Method, int], CellResult] = field(default_factory=dict)
    plan: Optional[SplitPlan] = None

    def cell(self, method, horizon: int) -> CellResult:
        return self.cells[(Method.parse(method), horizon)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EvalReport):
            return NotImplemented
        return (self.methods, self.horizons, self.plan) == (other.methods, other.horizons, other.plan) \
            and list(self.cells) == list(other.cells) \
            and all(self.cells[k] == other.cells[k] for k in self.cells)

    __hash__ = None

    @property
    def failures(self) -> List[CellResult]:
        return [c for c in self.cells.values() if not c.ok]

    def best_methods(self, horizon: int, ndigits: Optional[int] = None) -> Tuple[Method, ...]:
        """Methods attaining the minimum at this horizon (all of them on ties)."""
        scores = {m: self.cells[(m, horizon)].rmse_over_mean for m in self.methods
                  if self.cells[(m, horizon)].ok}
        if not scores:
            return ()
        if ndigits is not None:
            scores = {m: round(v, ndigits) for m, v in scores.items()}
        best = min(scores.values())
        return tuple(m for m in self.methods if m in scores and scores[m] == best)

    def degradation(self, method) -> Optional[float]:
        """Relative error growth from the first to the last horizon."""
        method = Method.parse(method)
        first = self.cells[(method, self.horizons[0])]
        last = self.cells[(method, self.horizons[-1])]
        if not (first.ok and last.ok) or first.rmse_over_mean == 0:
            return None
        return last.rmse_over_mean / first.rmse_over_mean - 1.0

    def to_records(self) -> List[dict]:
        records = []
        for (method, horizon), c in self.cells.items():
            records.append({
                "method": method.label,
                "horizon": horizon,
                "rmse_over_mean": c.rmse_over_mean,
                "n_points": c.n_points,
                "rmse": c.rmse,
                "mean_actual": c.mean_actual,
                "rmse_over_series_mean": c.rmse_over_series_mean,
                "error": c.error,
            })
        return records


# ============================================================================
# BACKTEST
# ============================================================================

def backtest(frame: FeatureFrame, spec: ForecastSpec, plan: SplitPlan) -> CellResult:
    """Walk-forward evaluation of one (method, horizon) over every fold."""
    if not plan.folds:
        raise NoFolds("split plan has no folds")
    if plan.folds[-1].test_stop > len(frame):
        raise NoFolds(f"split plan needs {plan.folds[-1].test_stop} days, frame has {len(frame)}")

    n = spec.horizon
    dates, actual, predicted, scores = [], [], [], []

    for fold in plan.folds:
        train = frame.slice(fold.train_start, fold.train_stop)
        forecaster = fit_direct(train, spec)

        fold_actual, fold_pred = [], []
        for target in fold.test:
            origin = target - n
            # view ends at the origin: nothing past it is reachable
            visible = frame.slice(fold.train_start, origin + 1)
            fold_pred.append(predict_at(forecaster, visible, origin - fold.train_start))
            fold_actual.append(frame.rewards.values[target])
            dates.append(frame.dates[target])

        fold_actual = np.asarray(fold_actual)
        fold_pred = np.asarray(fold_pred)
        scores.append(FoldScore(fold.index, rmse(fold_actual, fold_pred),
                                float(np.mean(fold_actual)), len(fold_actual)))
        actual.append(fold_actual)
        predicted.append(fold_pred)

    actual = np.concatenate(actual)
    predicted = np.concatenate(predicted)
    pooled_rmse = rmse(actual, predicted)
    # mean over the backtested span only; later days must not reach the report
    series_mean = float(np.mean(frame.rewards.values[:plan.folds[-1].test_stop]))

    result = CellResult(
        method=spec.method,
        horizon=n,
        rmse_over_mean=rmse_over_mean(actual, predicted),
        rmse=pooled_rmse,
        mean_actual=float(np.mean(actual)),
        rmse_over_series_mean=pooled_rmse / abs(series_mean) if series_mean != 0 else None,
        folds=tuple(scores),
        trace=Trace(np.asarray(dates, dtype="datetime64[D]"), actual, predicted),
    )
    logger.info("%s n=%d: RMSE/Mean=%.6f over %d points (%d folds)",
                spec.method.label, n, result.rmse_over_mean, len(actual), len(plan.folds))
    return result


def horizon_sweep(frame: FeatureFrame,
                  methods: Iterable,
                  horizons: Iterable[int],
                  spec: Optional[ForecastSpec] = None,
                  train_len: int = DEFAULT_TRAIN,
                  test_len: int = DEFAULT_TEST,
                  stride: Optional[int] = None,
                  max_workers: int = 1) -> EvalReport:
    """
    Backtest every (method, horizon) cell.  A failing cell is recorded with
    its error instead of aborting the sweep.  Cells are keyed and ordered by
    (method, horizon) whatever the completion order.
    """
    methods = tuple(dict.fromkeys(Method.parse(m) for m in methods))
    horizons = tuple(sorted(set(int(n) for n in horizons)))
    base = spec or ForecastSpec()
    keys = [(m, n) for m in methods for n in horizons]

    try:
        plan = make_splits(len(frame), train_len, test_len, stride)
    except NoFolds as exc:
        logger.info("sweep: %s", exc)
        cells = {k: CellResult(k[0], k[1], error=f"NoFolds {exc}", error_stage=exc.stage)
                 for k in keys}
        return EvalReport(methods, horizons, cells, None)

    def run(key: Tuple[Method, int]) -> CellResult:
        method, n = key
        cell_spec = base.with_method(method).with_horizon(n) if method != base.method \
            else base.with_horizon(n)
        try:
            return backtest(frame, cell_spec, plan)
        except StakingError as exc:
            logger.info("%s n=%d failed: %s: %s", method.label, n, type(exc).__name__, exc)
            return CellResult(method, n, error=f"{type(exc).__name__} {exc}", error_stage=exc.stage)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = dict(zip(keys, pool.map(run, keys)))
    else:
        results = {k: run(k) for k in keys}

    cells = {k: results[k] for k in sorted(keys, key=lambda k: (methods.index(k[0]), k[1]))}
    return EvalReport(methods, horizons, cells, plan)
