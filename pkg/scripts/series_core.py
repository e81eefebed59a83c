#!/usr/bin/env python3
"""
Daily Time Series and Feature Frames
====================================

Canonical in-memory representation of the daily feeds used by the staking
reward forecasters:

1. DailySeries  - one daily feed (rewards, price or search trends)
2. FeatureFrame - date-aligned bundle of rewards (required), price and trends
3. repair_gaps  - forward fill of short interior gaps
4. align        - intersection of the feeds' date ranges

Dates are calendar days (numpy datetime64[D]) without time zone.  Every object
here is immutable once built and safe to share between threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

DEFAULT_MAX_GAP = 3
FEATURE_NAMES = ("rewards", "price", "trends")
ONE_DAY = np.timedelta64(1, "D")


# ============================================================================
# ERRORS
# ============================================================================

class StakingError(ValueError):
    """Base class of every error raised by the forecasting pipeline.

    `stage` names the pipeline step the error belongs to (ingest, align, fit,
    eval, report); the command line prints it in front of the diagnostic.
    """

    stage = "eval"


class InvalidSeries(StakingError):
    stage = "ingest"


class GapTooLarge(StakingError):
    stage = "ingest"


class EmptyIntersection(StakingError):
    stage = "align"


# ============================================================================
# DAILY SERIES
# ============================================================================

def _as_days(dates) -> np.ndarray:
    return np.asarray(dates, dtype="datetime64[D]")


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class DailySeries:
    """
    One uniformly indexed daily series.

    Invariants checked on construction:
        - at least one observation
        - dates strictly increasing
        - every value finite

    Contiguity (consecutive dates one day apart) is only guaranteed after
    repair_gaps; `is_contiguous` reports it.
    """

    dates: np.ndarray
    values: np.ndarray
    name: str = "value"

    def __post_init__(self):
        dates = _as_days(self.dates)
        values = np.asarray(self.values, dtype=np.float64)

        if dates.ndim != 1 or values.ndim != 1:
            raise InvalidSeries("dates and values must be one-dimensional")
        if len(dates) != len(values):
            raise InvalidSeries(f"{len(dates)} dates but {len(values)} values")
        if len(dates) == 0:
            raise InvalidSeries("series is empty")
        if np.any(np.isnat(dates)):
            raise InvalidSeries("missing date")
        if len(dates) > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise InvalidSeries("dates are not strictly increasing")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise InvalidSeries(f"non-finite value at {dates[bad]}")

        object.__setattr__(self, "dates", _frozen(dates))
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[object, float]], name: str = "value") -> "DailySeries":
        pairs = list(pairs)
        return cls([d for d, _ in pairs], [v for _, v in pairs], name=name)

    @classmethod
    def from_pandas(cls, series: pd.Series, name: Optional[str] = None) -> "DailySeries":
        dates = series.index.to_numpy().astype("datetime64[D]")
        return cls(dates, series.to_numpy(dtype=np.float64), name=name or str(series.name or "value"))

    def to_pandas(self) -> pd.Series:
        index = pd.DatetimeIndex(self.dates.astype("datetime64[ns]"), name="date")
        return pd.Series(self.values, index=index, name=self.name)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DailySeries):
            return NotImplemented
        return np.array_equal(self.dates, other.dates) and np.array_equal(self.values, other.values)

    __hash__ = None

    @property
    def start(self) -> np.datetime64:
        return self.dates[0]

    @property
    def end(self) -> np.datetime64:
        return self.dates[-1]

    @property
    def is_contiguous(self) -> bool:
        return bool(np.all(np.diff(self.dates) == ONE_DAY))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def slice(self, start: int, stop: int) -> "DailySeries":
        """Positional slice [start, stop)."""
        return DailySeries(self.dates[start:stop], self.values[start:stop], name=self.name)

    def between(self, first: np.datetime64, last: np.datetime64) -> "DailySeries":
        """Inclusive date slice."""
        lo = int(np.searchsorted(self.dates, first, side="left"))
        hi = int(np.searchsorted(self.dates, last, side="right"))
        return self.slice(lo, hi)

    def with_values(self, values) -> "DailySeries":
        return DailySeries(self.dates, values, name=self.name)


# ============================================================================
# FEATURE FRAME
# ============================================================================

@dataclass(frozen=True, eq=False)
class FeatureFrame:
    """Date-aligned rewards (required) plus optional price and trends feeds."""

    rewards: DailySeries
    price: Optional[DailySeries] = None
    trends: Optional[DailySeries] = None

    def __post_init__(self):
        if not isinstance(self.rewards, DailySeries):
            raise InvalidSeries("rewards series is required")
        for name in ("price", "trends"):
            other = getattr(self, name)
            if other is not None and not np.array_equal(other.dates, self.rewards.dates):
                raise InvalidSeries(f"{name} dates differ from rewards dates")

    def __len__(self) -> int:
        return len(self.rewards)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureFrame):
            return NotImplemented
        return all(self.series(n) == other.series(n) for n in FEATURE_NAMES)

    __hash__ = None

    @property
    def dates(self) -> np.ndarray:
        return self.rewards.dates

    @property
    def date_range(self) -> Tuple[np.datetime64, np.datetime64]:
        return self.rewards.start, self.rewards.end

    @property
    def features(self) -> Tuple[str, ...]:
        return tuple(n for n in FEATURE_NAMES if self.series(n) is not None)

    def series(self, name: str) -> Optional[DailySeries]:
        if name not in FEATURE_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def slice(self, start: int, stop: int) -> "FeatureFrame":
        parts = {n: self.series(n).slice(start, stop) for n in self.features}
        return FeatureFrame(**parts)

    def with_rewards(self, values) -> "FeatureFrame":
        return FeatureFrame(self.rewards.with_values(values), self.price, self.trends)


# ============================================================================
# OPERATIONS
# ============================================================================

def repair_gaps(series: DailySeries, max_gap: int = DEFAULT_MAX_GAP) -> DailySeries:
    """
    Forward-fill interior gaps of at most `max_gap` missing days.

    Raises GapTooLarge when any interior gap is longer; the edges of a feed
    are never extended.
    """
    if max_gap < 0:
        raise InvalidSeries(f"max_gap must be >= 0, got {max_gap}")

    missing = (np.diff(series.dates) // ONE_DAY).astype(np.int64) - 1
    if missing.size == 0 or not missing.any():
        return series

    worst = int(np.argmax(missing))
    if missing[worst] > max_gap:
        raise GapTooLarge(
            f"{missing[worst]} missing days after {series.dates[worst]} (max_gap={max_gap})"
        )

    observed = series.to_pandas()
    grid = pd.date_range(observed.index[0], observed.index[-1], freq="D", name="date")
    filled = observed.reindex(grid).ffill()
    logger.debug("%s: forward-filled %d missing days", series.name, int(missing.sum()))
    return DailySeries.from_pandas(filled, name=series.name)


def align(rewards: DailySeries,
          price: Optional[DailySeries] = None,
          trends: Optional[DailySeries] = None) -> FeatureFrame:
    """Truncate the present feeds to their common date range."""
    feeds = {"rewards": rewards, "price": price, "trends": trends}
    feeds = {name: s for name, s in feeds.items() if s is not None}

    for name, s in feeds.items():
        if not s.is_contiguous:
            raise InvalidSeries(f"{name} has gaps; run repair_gaps first")

    first = max(s.start for s in feeds.values())
    last = min(s.end for s in feeds.values())
    if first > last:
        spans = ", ".join(f"{n} {s.start}..{s.end}" for n, s in feeds.items())
        raise EmptyIntersection(f"no common dates ({spans})")

    return FeatureFrame(**{name: s.between(first, last) for name, s in feeds.items()})
