import json
import re
from pathlib import Path

import pandas as pd
import pytest

from backtest import horizon_sweep
from report import (
    MISSING,
    EmptyTrace,
    asset_table_markdown,
    backtest_markdown,
    format_cell,
    horizon_table_markdown,
    merge_traces,
    render_svg,
    sweep_markdown,
    trace_frame,
    write_report_csv,
    write_report_json,
    write_trace_csv,
)

GOLDEN = Path(__file__).parent / "golden"


def test_format_cell():
    assert format_cell(0.0071234) == "0.007"
    assert format_cell(0.0) == "0.000"
    assert format_cell(0.0104, bold=True) == "**0.010**"
    assert format_cell(None) == MISSING
    assert format_cell(float("nan")) == MISSING


def test_horizon_table_matches_golden_header():
    assets, methods = ["ETH", "SOL", "XTZ"], ["MWA", "SLR"]
    table = {(a, m, n): 0.01 * n + (0.001 if m == "MWA" else 0.0) + 0.002 * k
             for k, a in enumerate(assets) for m in methods for n in range(1, 8)}
    text = horizon_table_markdown(assets, methods, range(1, 8), table)
    lines = text.splitlines()
    assert lines[:2] == (GOLDEN / "sweep_table_header.md").read_text().splitlines()
    assert len(lines) == 2 + 7
    for n, line in enumerate(lines[2:], start=1):
        cells = [c.strip() for c in line.strip("|").split("|")]
        assert cells[0] == str(n)
        # SLR is lower in every asset group
        assert [c.startswith("**") for c in cells[1:]] == [False, True] * 3


def test_horizon_table_bolds_minimum_and_dashes_missing():
    table = {("ETH", "MWA", 1): 0.0081, ("ETH", "SLR", 1): 0.0068, ("ETH", "MWA", 2): 0.008}
    text = horizon_table_markdown(["ETH"], ["MWA", "SLR"], [1, 2], table)
    rows = text.splitlines()[2:]
    assert rows[0] == "| 1 | 0.008 | **0.007** |"
    assert rows[1] == f"| 2 | **0.008** | {MISSING} |"


def test_horizon_table_tie_after_rounding():
    table = {("ETH", "MWA", 1): 0.0072, ("ETH", "SLR", 1): 0.0068}
    row = horizon_table_markdown(["ETH"], ["MWA", "SLR"], [1], table).splitlines()[2]
    assert row == "| 1 | **0.007** | **0.007** |"


def test_asset_table_layout():
    table = {("ETH", "MWA"): 0.0071, ("ETH", "SLR"): 0.0068, ("ETH", "MLR"): 0.0069,
             ("MATIC", "MWA"): 0.0578, ("MATIC", "SLR"): 0.0509}
    text = asset_table_markdown(["ETH", "MATIC"], ["MWA", "SLR", "MLR"], table)
    assert "Next Day" in text
    lines = [l for l in text.splitlines() if l.startswith("|")]
    assert lines[0].startswith("| Asset | Moving-Window Average |")
    assert lines[3] == f"| MATIC | 0.058 | **0.051** | {MISSING} |"


def test_backtest_markdown_values_and_points(constant_frame):
    report = horizon_sweep(constant_frame, ["mwa", "slr"], [1])
    text = backtest_markdown(report, "ETH", 1)
    assert text.startswith("## ETH: Staking Rewards Next Day Prediction Performance")
    assert "| Moving-Window Average | **0.000** | 60 |" in text
    assert "Notes" not in text


def test_sweep_markdown_notes_failures(constant_frame):
    report = horizon_sweep(constant_frame.slice(0, 119), ["mwa", "slr"], range(1, 8))
    text = sweep_markdown(report, "ETH")
    rows = [l for l in text.splitlines() if re.match(r"\| \d ", l)]
    assert len(rows) == 7
    assert all(row.count(MISSING) == 2 for row in rows)
    assert "Notes:" in text and "NoFolds" in text


def test_report_csv_full_precision(tmp_path, noise_frame):
    report = horizon_sweep(noise_frame, ["mwa", "slr"], [1, 2])
    path = write_report_csv(report, tmp_path / "report.csv")
    df = pd.read_csv(path, float_precision="round_trip")
    assert list(df.columns) == ["method", "horizon", "rmse_over_mean", "n_points"]
    assert df["method"].tolist() == ["MWA", "MWA", "SLR", "SLR"]
    for (_, row), cell in zip(df.iterrows(), report.cells.values()):
        assert row["rmse_over_mean"] == cell.rmse_over_mean
        assert row["n_points"] == cell.n_points


def test_report_json(tmp_path, trend_frame):
    report = horizon_sweep(trend_frame, ["mwa", "slr", "mlr"], [1, 7])
    payload = json.loads(write_report_json(report, tmp_path / "r.json", "ETH").read_text())
    assert payload["asset"] == "ETH"
    assert payload["split"] == {"train_len": 90, "test_len": 30, "stride": 30, "folds": 2}
    assert len(payload["cells"]) == 6
    assert payload["cells"][0]["folds"][0]["count"] == 30
    assert payload["best"]["1"] == ["SLR"]
    assert payload["cells"][-1]["error"] == "MissingFeature price"
    assert payload["degradation"]["MLR"] is None
    assert payload["degradation"]["MWA"] == pytest.approx(10 / 4 - 1, rel=1e-6)


def test_trace_csv_rows_match_points(tmp_path, noise_frame):
    report = horizon_sweep(noise_frame, ["slr"], [3])
    cell = report.cell("slr", 3)
    path = write_trace_csv(cell, tmp_path / "trace_slr_3.csv")
    df = pd.read_csv(path, float_precision="round_trip")
    assert list(df.columns) == ["date", "actual", "predicted"]
    assert len(df) == cell.n_points
    assert df["predicted"].tolist() == cell.trace.predicted.tolist()


def test_merge_traces(noise_frame):
    report = horizon_sweep(noise_frame, ["mwa", "slr"], [1])
    merged = merge_traces(list(report.cells.values()))
    assert list(merged.columns) == ["actual", "MWA", "SLR"]
    assert len(merged) == report.cell("mwa", 1).n_points
    assert trace_frame(report.cell("mwa", 1))["date"].iloc[0] == merged.index[0]


def _trace(columns, rows=2):
    return pd.DataFrame({c: [1.0 + i * 0.1 + k for i in range(rows)] for k, c in enumerate(columns)},
                        index=[f"2022-01-0{i + 1}" for i in range(rows)])


def test_render_svg_one_polyline_per_series():
    svg = render_svg(_trace(["actual", "MWA"]), title="ETH")
    assert svg.startswith("<svg")
    assert svg.count("<polyline") == 2
    assert "2022-01-01" in svg and ">date<" in svg
    assert render_svg(_trace(["actual", "MWA", "SLR"], rows=5)).count("<polyline") == 3


def test_render_svg_empty():
    with pytest.raises(EmptyTrace):
        render_svg(pd.DataFrame(columns=["actual"]))
