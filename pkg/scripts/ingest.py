#!/usr/bin/env python3
"""
Feed Ingestion and Synthetic Series
===================================

Reads the daily CSV exports (rewards, price, search trends) into DailySeries
and generates deterministic synthetic feeds standing in for the exchange data,
which is not redistributable.

CSV format (UTF-8, header row, ISO dates):

    date,reward_rate
    2021-06-23,0.0510
    2021-06-24,0.0508

Synthetic kinds:
    constant      x_t = level
    linear_trend  x_t = level + slope * t
    ar1           x_t = level + phi * (x_{t-1} - level) + e_t,  x_0 = level
    sine_noise    x_t = level + amplitude * sin(2 pi t / period) + e_t
    burst         level, with [burst_start, burst_start + burst_length) scaled
                  by burst_magnitude

Noise e_t ~ Normal(0, sigma^2) is drawn from numpy's PCG64 generator seeded
with `seed`, so equal specs give bit-identical series.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from series_core import (
    DEFAULT_MAX_GAP,
    DailySeries,
    FeatureFrame,
    StakingError,
    align,
    repair_gaps,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DATE_FORMATS = {"YYYY-MM-DD": "%Y-%m-%d"}
SYNTH_KINDS = ("constant", "linear_trend", "ar1", "sine_noise", "burst")
# First day of the original ETH collection window
DEFAULT_START = "2021-06-23"


class ParseError(StakingError):
    stage = "ingest"

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DuplicateDate(StakingError):
    stage = "ingest"


class MissingColumn(StakingError):
    stage = "ingest"


class InvalidSpec(StakingError):
    stage = "ingest"


# ============================================================================
# CSV FEEDS
# ============================================================================

@dataclass(frozen=True)
class FeedSchema:
    """Column layout of a feed CSV.

    value_column=None picks the single non-date column of the file.
    """

    date_column: str = "date"
    value_column: Optional[str] = None
    date_format: str = "YYYY-MM-DD"

    def __post_init__(self):
        if not self.date_column:
            raise InvalidSpec("date_column must be non-empty")
        if self.value_column is not None:
            if not self.value_column:
                raise InvalidSpec("value_column must be non-empty")
            if self.value_column == self.date_column:
                raise InvalidSpec("date and value columns must differ")
        if self.date_format not in DATE_FORMATS:
            raise InvalidSpec(f"unsupported date format {self.date_format!r}")

    def resolve_value_column(self, columns) -> str:
        if self.value_column is not None:
            return self.value_column
        others = [c for c in columns if c != self.date_column]
        if len(others) != 1:
            raise MissingColumn(f"cannot pick value column among {others}; name it explicitly")
        return others[0]


def read_feed(path: PathLike, schema: FeedSchema = FeedSchema()) -> DailySeries:
    """
    Parse one feed CSV into a date-sorted DailySeries.

    Gaps are kept; callers run repair_gaps.  Non-finite tokens (nan, inf) are
    rejected, not repaired.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False,
                         skip_blank_lines=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise ParseError("file is empty", line=1) from None
    except pd.errors.ParserError as exc:
        raise ParseError(str(exc).strip()) from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"invalid UTF-8 ({exc.reason})") from None

    df.columns = [str(c).strip() for c in df.columns]
    value_column = schema.resolve_value_column(df.columns)
    for column in (schema.date_column, value_column):
        if column not in df.columns:
            raise MissingColumn(f"{column} not in {path.name} (columns: {list(df.columns)})")

    # trailing blank lines are dropped; interior ones still fail with their line number
    blank = (df[schema.date_column].fillna("").str.strip() == "") \
        & (df[value_column].fillna("").str.strip() == "")
    filled = np.flatnonzero(~blank.to_numpy())
    df = df.iloc[:filled[-1] + 1 if filled.size else 0]

    fmt = DATE_FORMATS[schema.date_format]
    dates = np.empty(len(df), dtype="datetime64[D]")
    values = np.empty(len(df), dtype=np.float64)
    first_line = {}

    for offset, (raw_date, raw_value) in enumerate(zip(df[schema.date_column], df[value_column])):
        line = offset + 2  # header is line 1
        try:
            day = datetime.strptime(str(raw_date).strip(), fmt).date()
        except ValueError:
            raise ParseError(f"bad date {raw_date!r}", line=line) from None
        try:
            value = float(str(raw_value).strip())
        except ValueError:
            raise ParseError(f"bad value {raw_value!r}", line=line) from None
        if not math.isfinite(value):
            raise ParseError(f"non-finite value {raw_value!r}", line=line)

        if day in first_line:
            raise DuplicateDate(f"{day} on lines {first_line[day]} and {line}")
        first_line[day] = line
        dates[offset] = np.datetime64(day, "D")
        values[offset] = value

    if len(df) == 0:
        raise ParseError("no data rows", line=2)

    order = np.argsort(dates, kind="stable")
    logger.debug("read %d rows from %s", len(df), path)
    return DailySeries(dates[order], values[order], name=value_column)


def write_feed(series: DailySeries, path: PathLike, schema: FeedSchema = FeedSchema()) -> Path:
    """Write a feed CSV that read_feed parses back to the same series."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    value_column = schema.value_column or series.name
    df = pd.DataFrame({
        schema.date_column: np.datetime_as_string(series.dates, unit="D"),
        value_column: [repr(float(v)) for v in series.values],
    })
    df.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


def load_frame(rewards_path: PathLike,
               price_path: Optional[PathLike] = None,
               trends_path: Optional[PathLike] = None,
               max_gap: int = DEFAULT_MAX_GAP,
               schema: FeedSchema = FeedSchema()) -> FeatureFrame:
    """read_feed + repair_gaps for each feed, then align."""
    feeds = {}
    for name, p in (("rewards", rewards_path), ("price", price_path), ("trends", trends_path)):
        if p is not None:
            feeds[name] = repair_gaps(read_feed(p, schema), max_gap)
    return align(**feeds)


# ============================================================================
# SYNTHETIC FEEDS
# ============================================================================

@dataclass(frozen=True)
class SynthSpec:
    kind: str = "constant"
    length: int = 150
    seed: int = 0
    level: float = 1.0
    slope: float = 0.0
    phi: float = 0.0
    sigma: float = 0.0
    amplitude: float = 0.0
    period: float = 30.0
    burst_start: int = 0
    burst_length: int = 0
    burst_magnitude: float = 1.0
    start: str = DEFAULT_START

    def __post_init__(self):
        if self.kind not in SYNTH_KINDS:
            raise InvalidSpec(f"unknown kind {self.kind!r}; expected one of {SYNTH_KINDS}")
        if self.length < 1:
            raise InvalidSpec(f"length must be >= 1, got {self.length}")
        if not self.sigma >= 0:
            raise InvalidSpec(f"sigma must be >= 0, got {self.sigma}")
        if self.kind == "ar1" and not abs(self.phi) < 1:
            raise InvalidSpec(f"ar1 needs |phi| < 1, got {self.phi}")
        if self.kind == "sine_noise" and not self.period > 0:
            raise InvalidSpec(f"period must be > 0, got {self.period}")
        if self.kind == "burst":
            if self.burst_length < 0 or self.burst_start < 0:
                raise InvalidSpec("burst window must be non-negative")
            if self.burst_start + self.burst_length > self.length:
                raise InvalidSpec("burst window exceeds series length")
        try:
            np.datetime64(self.start, "D")
        except ValueError:
            raise InvalidSpec(f"bad start date {self.start!r}") from None
        numbers = (self.level, self.slope, self.phi, self.sigma, self.amplitude, self.burst_magnitude)
        if not all(math.isfinite(x) for x in numbers):
            raise InvalidSpec("parameters must be finite")


def generate(spec: SynthSpec, name: str = "reward_rate") -> DailySeries:
    """Deterministic synthetic series for a fixed spec (seed included)."""
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.length, dtype=np.float64)
    noise = rng.normal(0.0, spec.sigma, spec.length)

    if spec.kind == "constant":
        values = np.full(spec.length, spec.level)
    elif spec.kind == "linear_trend":
        values = spec.level + spec.slope * t
    elif spec.kind == "ar1":
        noise[0] = 0.0  # x_0 = level
        values = spec.level + lfilter([1.0], [1.0, -spec.phi], noise)
    elif spec.kind == "sine_noise":
        values = spec.level + spec.amplitude * np.sin(2 * np.pi * t / spec.period) + noise
    else:
        values = np.full(spec.length, spec.level)
        window = slice(spec.burst_start, spec.burst_start + spec.burst_length)
        values[window] *= spec.burst_magnitude
        values = values + noise

    dates = np.datetime64(spec.start, "D") + np.arange(spec.length)
    return DailySeries(dates, values, name=name)
