#!/usr/bin/env python3
"""
Report Writers
==============

Markdown tables shaped like the published next-day and next-N-day tables,
lossless CSV/JSON exports of an EvalReport, prediction traces for plotting,
and a dependency-free SVG line chart.

Displayed table values are rounded to 3 decimals; CSV and JSON carry full
precision.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd

from backtest import CellResult, EvalReport
from series_core import StakingError

PathLike = Union[str, Path]

DECIMALS = 3
MISSING = "—"
REPORT_COLUMNS = ["method", "horizon", "rmse_over_mean", "n_points"]

METHOD_TITLES = {
    "MWA": "Moving-Window Average",
    "SLR": "Single Linear Regression (rewards only)",
    "MLR": "Multiple Linear Regression (rewards, price, trends)",
}


class EmptyTrace(StakingError):
    stage = "report"


def format_cell(value: Optional[float], bold: bool = False) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return MISSING
    text = f"{value:.{DECIMALS}f}"
    return f"**{text}**" if bold else text


def _markdown(header: Sequence[str], rows: Sequence[Sequence[str]], align: Sequence[str]) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join(align) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


# ============================================================================
# EVAL REPORT -> TABLES
# ============================================================================

def report_frame(report: EvalReport) -> pd.DataFrame:
    """Long table: one row per (method, horizon) with the full metric set."""
    return pd.DataFrame.from_records(report.to_records(),
                                     columns=REPORT_COLUMNS + ["rmse", "mean_actual",
                                                               "rmse_over_series_mean", "error"])


def _notes(report: EvalReport) -> List[str]:
    return [f"- {c.method.label} n={c.horizon}: {c.error}" for c in report.failures]


def backtest_markdown(report: EvalReport, asset: str, horizon: int) -> str:
    """Rows = methods, one RMSE/Mean cell each (next-day table layout)."""
    best = set(report.best_methods(horizon, ndigits=DECIMALS))
    rows = []
    for method in report.methods:
        c = report.cell(method, horizon)
        rows.append([METHOD_TITLES[method.label], format_cell(c.rmse_over_mean, method in best),
                     str(c.n_points)])
    title = "Next Day" if horizon == 1 else f"Next {horizon}-Day"
    text = f"## {asset}: Staking Rewards {title} Prediction Performance (RMSE/Mean)\n\n"
    text += _markdown(["Method", "RMSE/Mean", "Points"], rows, [":---", "---:", "---:"])
    notes = _notes(report)
    if notes:
        text += "\nNotes:\n" + "\n".join(notes) + "\n"
    return text


def sweep_markdown(report: EvalReport, asset: str) -> str:
    """N rows, one column per method, per-row minimum in bold."""
    table = {(asset, m.label, n): report.cell(m, n).rmse_over_mean
             for m in report.methods for n in report.horizons}
    text = f"## {asset}: Staking Rewards Next N-Day Prediction Performance (RMSE/Mean)\n\n"
    text += horizon_table_markdown([asset], [m.label for m in report.methods],
                                   list(report.horizons), table)
    notes = _notes(report)
    if notes:
        text += "\nNotes:\n" + "\n".join(notes) + "\n"
    return text


def horizon_table_markdown(assets: Sequence[str], methods: Sequence[str], horizons: Sequence[int],
                           table: Dict[Tuple[str, str, int], Optional[float]]) -> str:
    """N | <asset> <method> ... with the minimum of each asset's row group in bold."""
    header = ["N"] + [f"{a} {m}" for a in assets for m in methods]
    rows = []
    for n in horizons:
        row = [str(n)]
        for a in assets:
            values = {m: table.get((a, m, n)) for m in methods}
            shown = {m: round(v, DECIMALS) for m, v in values.items()
                     if v is not None and not np.isnan(v)}
            best = min(shown.values()) if shown else None
            row += [format_cell(values[m], m in shown and shown[m] == best) for m in methods]
        rows.append(row)
    return _markdown(header, rows, [":---:"] + ["---:"] * (len(header) - 1))


def asset_table_markdown(assets: Sequence[str], methods: Sequence[str],
                         table: Dict[Tuple[str, str], Optional[float]], horizon: int = 1) -> str:
    """Asset rows, method columns (next-day comparison across assets)."""
    rows = []
    for a in assets:
        values = {m: table.get((a, m)) for m in methods}
        shown = {m: round(v, DECIMALS) for m, v in values.items() if v is not None and not np.isnan(v)}
        best = min(shown.values()) if shown else None
        rows.append([a] + [format_cell(values[m], m in shown and shown[m] == best) for m in methods])
    title = "Next Day" if horizon == 1 else f"Next {horizon}-Day"
    text = f"## Staking Rewards {title} Prediction Performance (RMSE/Mean)\n\n"
    return text + _markdown(["Asset"] + [METHOD_TITLES.get(m, m) for m in methods], rows,
                            [":---"] + ["---:"] * len(methods))


# ============================================================================
# FILE OUTPUTS
# ============================================================================

def write_report_csv(report: EvalReport, path: PathLike) -> Path:
    path = Path(path)
    report_frame(report)[REPORT_COLUMNS].to_csv(path, index=False, na_rep="", lineterminator="\n")
    return path


def write_report_json(report: EvalReport, path: PathLike, asset: str) -> Path:
    path = Path(path)
    plan = report.plan
    payload = {
        "asset": asset,
        "methods": [m.label for m in report.methods],
        "horizons": list(report.horizons),
        "split": None if plan is None else {
            "train_len": plan.train_len, "test_len": plan.test_len,
            "stride": plan.stride, "folds": len(plan.folds),
        },
        "cells": [],
    }
    for record, cell in zip(report.to_records(), report.cells.values()):
        record["folds"] = [
            {"fold": f.fold, "rmse": f.rmse, "mean_actual": f.mean_actual, "count": f.count}
            for f in cell.folds
        ]
        payload["cells"].append(record)
    payload["best"] = {str(n): [m.label for m in report.best_methods(n)] for n in report.horizons}
    payload["degradation"] = {m.label: report.degradation(m) for m in report.methods}
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
    return path


def trace_frame(cell: CellResult) -> pd.DataFrame:
    if cell.trace is None:
        return pd.DataFrame(columns=["date", "actual", "predicted"])
    return pd.DataFrame({
        "date": np.datetime_as_string(cell.trace.dates, unit="D"),
        "actual": cell.trace.actual,
        "predicted": cell.trace.predicted,
    })


def write_trace_csv(cell: CellResult, path: PathLike) -> Path:
    path = Path(path)
    trace_frame(cell).to_csv(path, index=False, lineterminator="\n")
    return path


def merge_traces(cells: Sequence[CellResult]) -> pd.DataFrame:
    """date-indexed table: actual plus one predicted column per method."""
    merged = None
    for cell in cells:
        if cell.trace is None:
            continue
        part = trace_frame(cell).set_index("date").rename(columns={"predicted": cell.method.label})
        if merged is None:
            merged = part
        else:
            merged = merged.join(part[[cell.method.label]], how="outer")
            merged["actual"] = merged["actual"].fillna(part["actual"])
    if merged is None:
        return pd.DataFrame(columns=["actual"])
    return merged.sort_index()


# ============================================================================
# SVG CHART
# ============================================================================

COLORS = ["#222222", "#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
WIDTH, HEIGHT = 800, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 130, 40, 50


def render_svg(trace: pd.DataFrame, title: str = "") -> str:
    """
    Standalone SVG line chart: one polyline per column of `trace`
    (actual first, then each method), date axis along x.
    """
    if trace is None or len(trace) == 0 or trace.shape[1] == 0:
        raise EmptyTrace("nothing to plot")

    data = trace.to_numpy(dtype=np.float64)
    finite = data[np.isfinite(data)]
    if finite.size == 0:
        raise EmptyTrace("trace has no finite values")
    lo, hi = float(finite.min()), float(finite.max())
    if hi == lo:
        lo, hi = lo - 0.5 * (abs(lo) or 1.0), hi + 0.5 * (abs(hi) or 1.0)

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    count = len(trace)

    def x_of(i: int) -> float:
        return MARGIN_LEFT + (plot_w * i / (count - 1) if count > 1 else plot_w / 2)

    def y_of(v: float) -> float:
        return MARGIN_TOP + plot_h * (hi - v) / (hi - lo)

    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" font-family="serif" '
        f'font-size="15">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>',
    ]

    labels = [str(d) for d in trace.index]
    for i in sorted({0, count // 2, count - 1}):
        parts.append(f'<text x="{x_of(i):.2f}" y="{y0 + 20}" text-anchor="middle" '
                     f'font-family="serif" font-size="11">{escape(labels[i])}</text>')
    for v in (lo, (lo + hi) / 2, hi):
        parts.append(f'<text x="{x0 - 6}" y="{y_of(v) + 4:.2f}" text-anchor="end" '
                     f'font-family="serif" font-size="11">{v:.4g}</text>')
    parts.append(f'<text x="{x0 + plot_w / 2:.0f}" y="{HEIGHT - 8}" text-anchor="middle" '
                 f'font-family="serif" font-size="12">date</text>')
    parts.append(f'<text x="16" y="{MARGIN_TOP + plot_h / 2:.0f}" text-anchor="middle" '
                 f'font-family="serif" font-size="12" '
                 f'transform="rotate(-90 16 {MARGIN_TOP + plot_h / 2:.0f})">rewards</text>')

    for k, column in enumerate(trace.columns):
        color = COLORS[k % len(COLORS)]
        values = data[:, k]
        points = " ".join(f"{x_of(i):.2f},{y_of(v):.2f}" for i, v in enumerate(values)
                          if np.isfinite(v))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{points}"><title>{escape(str(column))}</title></polyline>')
        ly = MARGIN_TOP + 18 * k + 10
        parts.append(f'<line x1="{x0 + plot_w + 12}" y1="{ly}" x2="{x0 + plot_w + 32}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{x0 + plot_w + 38}" y="{ly + 4}" font-family="serif" '
                     f'font-size="11">{escape(str(column))}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(trace: pd.DataFrame, path: PathLike, title: str = "") -> Path:
    path = Path(path)
    path.write_text(render_svg(trace, title), encoding="utf-8")
    return path
