#!/usr/bin/env python3
"""
Staking Rewards Forecasting - Command Line
==========================================

Backtests, horizon sweeps and forecasts of daily staking reward rates from
CSV feeds, plus synthetic feed generation and multi-asset table assembly.

Usage:
    python staking_forecast.py synth --kind ar1 --level 1 --phi 0.95 --sigma 0.01 \\
        --length 2000 --seed 7 --out ../data/synthetic/ar1_rewards.csv
    python staking_forecast.py backtest --rewards eth_rewards.csv --price eth_price.csv \\
        --trends eth_trends.csv --asset ETH --out ../results/eth
    python staking_forecast.py sweep --rewards eth_rewards.csv --horizon 7 --asset ETH \\
        --out ../results/eth_sweep
    python staking_forecast.py forecast --rewards eth_rewards.csv --method mwa --horizon 3
    python staking_forecast.py combine ETH=../results/eth_sweep/report.csv \\
        SOL=../results/sol_sweep/report.csv --out ../results/assets

Results go to stdout and files; diagnostics go to stderr as a single line
"<stage>: <Error> <detail>".  Exit status is 0 only when no stage failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import dataclass, fields
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from backtest import DEFAULT_TEST, DEFAULT_TRAIN, EvalReport, horizon_sweep
from forecast import (
    DEFAULT_LAGS,
    DEFAULT_RIDGE_EPS,
    DEFAULT_WINDOW,
    ForecastSpec,
    InsufficientHistory,
    Method,
    fit_horizons,
    predict_at,
    require_features,
)
from ingest import DEFAULT_START, FeedSchema, SynthSpec, generate, read_feed, write_feed
from report import (
    asset_table_markdown,
    backtest_markdown,
    horizon_table_markdown,
    merge_traces,
    sweep_markdown,
    write_report_csv,
    write_report_json,
    write_svg,
    write_trace_csv,
)
from series_core import DEFAULT_MAX_GAP, FeatureFrame, StakingError, align, repair_gaps

logger = logging.getLogger("staking_forecast")

FORMATS = ("md", "csv", "svg")
FORMAT_ALIASES = {"markdown": "md", "md": "md", "csv": "csv", "svg": "svg"}
DEFAULT_SWEEP_HORIZON = 7


class InvalidConfig(StakingError):
    stage = "config"


class StageFailure(Exception):
    """A pipeline stage failed; str() is the one-line diagnostic."""

    def __init__(self, stage: str, error: BaseException):
        self.stage = stage
        self.error = error
        super().__init__(f"{stage}: {type(error).__name__} {error}")


@contextmanager
def stage(name: str):
    try:
        yield
    except StageFailure:
        raise
    except (StakingError, OSError) as exc:
        raise StageFailure(name, exc) from exc


# ============================================================================
# CONFIGURATION
# ============================================================================

def _split_list(value) -> Tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        value = value.split(",")
    return tuple(str(v).strip().lower() for v in value if str(v).strip())


def _whole_number(name: str, value) -> int:
    try:
        if isinstance(value, bool) or int(value) != value:
            raise ValueError
    except (TypeError, ValueError, OverflowError):
        raise InvalidConfig(f"{name} must be an integer, got {value!r}") from None
    return int(value)


@dataclass(frozen=True)
class RunConfig:
    rewards: Optional[str] = None
    price: Optional[str] = None
    trends: Optional[str] = None
    asset: str = "ASSET"
    methods: Tuple[str, ...] = ()
    window: int = DEFAULT_WINDOW
    lags: int = DEFAULT_LAGS
    horizon: int = 1
    train: int = DEFAULT_TRAIN
    test: int = DEFAULT_TEST
    stride: Optional[int] = None
    max_gap: int = DEFAULT_MAX_GAP
    ridge_eps: float = DEFAULT_RIDGE_EPS
    out: str = "results"
    formats: Tuple[str, ...] = FORMATS
    workers: int = 1

    def __post_init__(self):
        if not self.rewards:
            raise InvalidConfig("a rewards feed is required (--rewards)")
        methods = tuple(Method.parse(m).value for m in _split_list(self.methods))
        object.__setattr__(self, "methods", methods)
        formats = []
        for f in _split_list(self.formats):
            if f not in FORMAT_ALIASES:
                raise InvalidConfig(f"unknown format {f!r} (md, csv, svg)")
            formats.append(FORMAT_ALIASES[f])
        object.__setattr__(self, "formats", tuple(dict.fromkeys(formats)))
        for name in ("window", "lags", "horizon", "train", "test", "stride", "max_gap", "workers"):
            value = getattr(self, name)
            if value is not None or name != "stride":
                object.__setattr__(self, name, _whole_number(name, value))
        try:
            object.__setattr__(self, "ridge_eps", float(self.ridge_eps))
        except (TypeError, ValueError):
            raise InvalidConfig(f"ridge_eps must be a number, got {self.ridge_eps!r}") from None
        for name in ("train", "test", "workers"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1")
        if self.stride is not None and self.stride < 1:
            raise InvalidConfig("stride must be >= 1")
        if self.max_gap < 0:
            raise InvalidConfig("max_gap must be >= 0")
        # window/lags/horizon/ridge_eps checks live in ForecastSpec
        self.base_spec()

    @classmethod
    def from_sources(cls, args: argparse.Namespace, defaults: Optional[dict] = None) -> "RunConfig":
        """defaults < JSON config file < explicit command-line flags."""
        values = dict(defaults or {})
        if getattr(args, "config", None):
            with open(args.config) as f:
                try:
                    loaded = json.load(f)
                except json.JSONDecodeError as exc:
                    raise InvalidConfig(f"{args.config}: {exc}") from None
            if not isinstance(loaded, dict):
                raise InvalidConfig(f"{args.config} must hold a JSON object")
            values.update(loaded)
        names = {f.name for f in fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        for name in names:
            value = getattr(args, name, None)
            if value is not None:
                values[name] = value
        return cls(**values)

    def base_spec(self) -> ForecastSpec:
        method = self.methods[0] if self.methods else Method.MWA
        return ForecastSpec(method=method, window=self.window, lags=self.lags,
                            horizon=self.horizon, ridge_eps=self.ridge_eps)

    def resolve_methods(self, frame: FeatureFrame) -> Tuple[Method, ...]:
        if self.methods:
            return tuple(Method.parse(m) for m in self.methods)
        methods = [Method.MWA, Method.SLR]
        if frame.price is not None and frame.trends is not None:
            methods.append(Method.MLR)
        return tuple(methods)


# ============================================================================
# PIPELINE STAGES
# ============================================================================

def load_feeds(config: RunConfig) -> FeatureFrame:
    with stage("ingest"):
        feeds = {}
        for name in ("rewards", "price", "trends"):
            path = getattr(config, name)
            if path is not None:
                feeds[name] = repair_gaps(read_feed(path, FeedSchema()), config.max_gap)
                logger.info("%s: %d days from %s", name, len(feeds[name]), path)
    with stage("align"):
        frame = align(**feeds)
        for method in config.resolve_methods(frame):
            require_features(frame, method.features)
    logger.info("frame %s..%s (%d days, features %s)", frame.date_range[0], frame.date_range[1],
                len(frame), ",".join(frame.features))
    return frame


def run_sweep(frame: FeatureFrame, config: RunConfig, horizons: Sequence[int]) -> EvalReport:
    with stage("eval"):
        return horizon_sweep(frame, config.resolve_methods(frame), horizons,
                             spec=config.base_spec(), train_len=config.train,
                             test_len=config.test, stride=config.stride,
                             max_workers=config.workers)


def write_outputs(report: EvalReport, config: RunConfig, markdown: str) -> Path:
    out = Path(config.out)
    with stage("report"):
        out.mkdir(parents=True, exist_ok=True)
        write_report_json(report, out / "report.json", config.asset)
        if "md" in config.formats:
            (out / "report.md").write_text(markdown, encoding="utf-8")
        if "csv" in config.formats:
            write_report_csv(report, out / "report.csv")
            for (method, n), cell in report.cells.items():
                if cell.ok:
                    write_trace_csv(cell, out / f"trace_{method.value}_{n}.csv")
        if "svg" in config.formats:
            for n in report.horizons:
                cells = [report.cell(m, n) for m in report.methods if report.cell(m, n).ok]
                if cells:
                    write_svg(merge_traces(cells), out / f"chart_{n}.svg",
                              title=f"{config.asset}: next {n}-day predictions")
    logger.info("wrote reports to %s", out)
    return out


def finish(report: EvalReport) -> int:
    failures = report.failures
    if not failures:
        return 0
    first = failures[0]
    extra = f" ({len(failures)} of {len(report.cells)} cells failed)" if len(failures) > 1 else ""
    print(f"{first.error_stage or 'eval'}: {first.error}{extra}", file=sys.stderr)
    return 1


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_backtest(args: argparse.Namespace) -> int:
    with stage("config"):
        config = RunConfig.from_sources(args)
    frame = load_feeds(config)
    report = run_sweep(frame, config, [config.horizon])
    write_outputs(report, config, backtest_markdown(report, config.asset, config.horizon))
    return finish(report)


def cmd_sweep(args: argparse.Namespace) -> int:
    with stage("config"):
        config = RunConfig.from_sources(args, defaults={"horizon": DEFAULT_SWEEP_HORIZON})
    frame = load_feeds(config)
    report = run_sweep(frame, config, range(1, config.horizon + 1))
    write_outputs(report, config, sweep_markdown(report, config.asset))
    return finish(report)


def cmd_forecast(args: argparse.Namespace) -> int:
    with stage("config"):
        config = RunConfig.from_sources(args)
        if len(config.methods) > 1:
            raise InvalidConfig("forecast takes a single --method")
    frame = load_feeds(config)
    spec = config.base_spec()

    with stage("fit"):
        if len(frame) < config.train:
            raise InsufficientHistory(f"{len(frame)} days of data, forecast fits on the last "
                                      f"{config.train}")
        recent = frame.slice(len(frame) - config.train, len(frame))
        horizons = range(1, config.horizon + 1)
        fitted = fit_horizons(recent, spec, horizons, max_workers=config.workers)
        origin = len(recent) - 1
        predictions = [(recent.dates[origin] + np.timedelta64(n, "D"),
                        predict_at(fitted[n], recent, origin)) for n in horizons]

    for day, value in predictions:
        print(f"{day},{float(value)!r}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    with stage("synth"):
        spec = SynthSpec(kind=args.kind, length=args.length, seed=args.seed, level=args.level,
                         slope=args.slope, phi=args.phi, sigma=args.sigma,
                         amplitude=args.amplitude, period=args.period,
                         burst_start=args.burst_start, burst_length=args.burst_length,
                         burst_magnitude=args.burst_magnitude, start=args.start)
        series = generate(spec, name=args.value_column)
        path = write_feed(series, args.out, FeedSchema(value_column=args.value_column))
    logger.info("wrote %d days of %s data to %s", len(series), spec.kind, path)
    return 0


def _read_labelled_reports(items: Sequence[str]) -> List[Tuple[str, pd.DataFrame]]:
    reports = []
    for item in items:
        label, sep, path = item.partition("=")
        if not sep or not label or not path:
            raise InvalidConfig(f"expected ASSET=path/to/report.csv, got {item!r}")
        df = pd.read_csv(path, float_precision="round_trip")
        missing = {"method", "horizon", "rmse_over_mean"} - set(df.columns)
        if missing:
            raise InvalidConfig(f"{path} lacks columns {sorted(missing)}")
        reports.append((label, df))
    return reports


def cmd_combine(args: argparse.Namespace) -> int:
    with stage("ingest"):
        reports = _read_labelled_reports(args.reports)

    assets = [label for label, _ in reports]
    methods = list(dict.fromkeys(m for _, df in reports for m in df["method"]))
    horizons = sorted({int(n) for _, df in reports for n in df["horizon"]})
    layout = args.layout
    if layout == "auto":
        layout = "horizons" if len(horizons) > 1 else "methods"

    def value(v):
        return None if pd.isna(v) else float(v)

    if layout == "horizons":
        table = {(a, m, int(n)): value(v) for a, df in reports
                 for m, n, v in zip(df["method"], df["horizon"], df["rmse_over_mean"])}
        title = "## Staking Rewards Next N-Day Prediction Performance Over Days (RMSE/Mean)\n\n"
        text = title + horizon_table_markdown(assets, methods, horizons, table)
    else:
        horizon = args.horizon or horizons[0]
        table = {(a, m): value(v) for a, df in reports
                 for m, n, v in zip(df["method"], df["horizon"], df["rmse_over_mean"])
                 if int(n) == horizon}
        text = asset_table_markdown(assets, methods, table, horizon)

    print(text, end="")
    if args.out:
        with stage("report"):
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "table.md").write_text(text, encoding="utf-8")
    return 0


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def _feed_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file with run settings (flags override it)")
    p.add_argument("--rewards", help="Rewards feed CSV (required)")
    p.add_argument("--price", help="Price feed CSV")
    p.add_argument("--trends", help="Search trends feed CSV")
    p.add_argument("--asset", help="Asset label used in tables (default ASSET)")
    p.add_argument("--method", dest="methods", help="mwa, slr, mlr or a comma list")
    p.add_argument("--window", type=int, help=f"MWA window W (default {DEFAULT_WINDOW})")
    p.add_argument("--lags", type=int, help=f"Regression lags L (default {DEFAULT_LAGS})")
    p.add_argument("--horizon", type=int, help="Horizon n; for sweep the largest N (default 7)")
    p.add_argument("--train", type=int, help=f"Training days per fold (default {DEFAULT_TRAIN})")
    p.add_argument("--test", type=int, help=f"Test days per fold (default {DEFAULT_TEST})")
    p.add_argument("--stride", type=int, help="Days between folds (default = --test)")
    p.add_argument("--max-gap", dest="max_gap", type=int,
                   help=f"Longest interior gap to forward-fill (default {DEFAULT_MAX_GAP})")
    p.add_argument("--ridge-eps", dest="ridge_eps", type=float,
                   help=f"Ridge stabilizer (default {DEFAULT_RIDGE_EPS:g})")
    p.add_argument("--out", help="Output directory (default results)")
    p.add_argument("--format", dest="formats", help="Comma list of md, csv, svg")
    p.add_argument("--workers", type=int, help="Parallel backtest cells (default 1)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Staking rewards forecasting and backtesting")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Errors only")
    sub = parser.add_subparsers(dest="command", required=True)
    feeds = _feed_options()

    p = sub.add_parser("backtest", parents=[feeds], help="Walk-forward backtest at one horizon")
    p.set_defaults(handler=cmd_backtest)
    p = sub.add_parser("sweep", parents=[feeds], help="Backtest horizons 1..N")
    p.set_defaults(handler=cmd_sweep)
    p = sub.add_parser("forecast", parents=[feeds], help="Forecast the next n days")
    p.set_defaults(handler=cmd_forecast)

    p = sub.add_parser("synth", help="Write a synthetic feed CSV")
    p.add_argument("--kind", default="constant", help="constant, linear_trend, ar1, sine_noise, burst")
    p.add_argument("--length", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=1.0)
    p.add_argument("--slope", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--amplitude", type=float, default=0.0)
    p.add_argument("--period", type=float, default=30.0)
    p.add_argument("--burst-start", dest="burst_start", type=int, default=0)
    p.add_argument("--burst-length", dest="burst_length", type=int, default=0)
    p.add_argument("--burst-magnitude", dest="burst_magnitude", type=float, default=1.0)
    p.add_argument("--start", default=DEFAULT_START, help="First date (YYYY-MM-DD)")
    p.add_argument("--value-column", dest="value_column", default="reward_rate")
    p.add_argument("--out", required=True, help="Output CSV path")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("combine", help="Merge per-asset report.csv files into one table")
    p.add_argument("reports", nargs="+", help="ASSET=path/to/report.csv")
    p.add_argument("--layout", choices=("auto", "methods", "horizons"), default="auto")
    p.add_argument("--horizon", type=int, help="Horizon for the methods layout")
    p.add_argument("--out", help="Directory for table.md")
    p.set_defaults(handler=cmd_combine)
    return parser


def configure_logging(verbose: int = 0, quiet: bool = False) -> None:
    level = logging.ERROR if quiet else (logging.DEBUG if verbose > 1 else
                                         logging.INFO if verbose == 1 else logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level, force=True,
                        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        return args.handler(args)
    except StageFailure as failure:
        print(str(failure), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
