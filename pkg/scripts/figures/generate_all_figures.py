#!/usr/bin/env python3
"""
Generate All Figures for the Staking Rewards Forecasts
======================================================

Publication-style figures from the files written by staking_forecast.py:

    fig_next_day_predictions   actual rewards vs next-day predictions per method
    fig_n_day_grid             next n-day predictions, n = 1..7, first 30 test days
    fig_feature_panel          rewards, price and search trends over time

Usage:
    python generate_all_figures.py --results ../../results/eth_sweep \\
        --rewards eth_rewards.csv --price eth_price.csv --trends eth_trends.csv
"""

import argparse
import re
import sys
from pathlib import Path

import matplotlib
import matplotlib.pyplot as plt
import pandas as pd

SCRIPT_DIR = Path(__file__).parent
sys.path.insert(0, str(SCRIPT_DIR.parent))

from ingest import read_feed  # noqa: E402

# Set publication-quality style
plt.style.use('seaborn-v0_8-paper')
matplotlib.rcParams.update({
    'font.size': 11,
    'font.family': 'serif',
    'font.serif': ['Times New Roman', 'Times', 'DejaVu Serif'],
    'axes.labelsize': 12,
    'axes.titlesize': 13,
    'xtick.labelsize': 10,
    'ytick.labelsize': 10,
    'legend.fontsize': 10,
    'figure.titlesize': 14,
    'text.usetex': False,
    'figure.dpi': 300,
    'savefig.dpi': 300,
    'savefig.bbox': 'tight',
    'savefig.pad_inches': 0.1
})

OUTPUT_DIR = SCRIPT_DIR.parent.parent / 'figures'
COLORS = {'actual': '#222222', 'MWA': '#3498db', 'SLR': '#e74c3c', 'MLR': '#2ecc71'}
TRACE_NAME = re.compile(r'trace_(?P<method>[a-z]+)_(?P<n>\d+)\.csv$')


def load_traces(results_dir):
    """{n: DataFrame indexed by date with actual + one column per method}"""
    traces = {}
    for path in sorted(Path(results_dir).glob('trace_*_*.csv')):
        match = TRACE_NAME.search(path.name)
        if match is None:
            continue
        n = int(match['n'])
        df = pd.read_csv(path, parse_dates=['date']).set_index('date')
        column = match['method'].upper()
        if n not in traces:
            traces[n] = df.rename(columns={'predicted': column})
        else:
            traces[n] = traces[n].join(df[['predicted']].rename(columns={'predicted': column}),
                                       how='outer')
    return traces


def _plot_trace(ax, df):
    for column in df.columns:
        ax.plot(df.index, df[column], label=column, color=COLORS.get(column),
                linewidth=1.6 if column == 'actual' else 1.1,
                linestyle='-' if column == 'actual' else '--')


def generate_next_day_predictions(args):
    """Figure 1: next-day predictions against actual rewards."""
    traces = load_traces(args.results)
    if 1 not in traces:
        raise FileNotFoundError(f"no trace_<method>_1.csv in {args.results}")

    fig, ax = plt.subplots(figsize=(11, 5))
    _plot_trace(ax, traces[1])
    ax.set_xlabel('Date', fontweight='bold')
    ax.set_ylabel('Staking rewards', fontweight='bold')
    ax.set_title(f'{args.asset}: Next Day Predictions of Rewards', fontweight='bold')
    ax.legend(loc='best')
    ax.grid(alpha=0.3, linestyle='--')
    fig.autofmt_xdate()

    plt.tight_layout()
    plt.savefig(OUTPUT_DIR / 'fig_next_day_predictions.pdf', format='pdf')
    plt.savefig(OUTPUT_DIR / 'fig_next_day_predictions.png', format='png')
    plt.close()


def generate_n_day_grid(args):
    """Figure 2: one panel per horizon, first 30 test days."""
    traces = load_traces(args.results)
    horizons = sorted(traces)
    if not horizons:
        raise FileNotFoundError(f"no trace CSVs in {args.results}")

    cols = min(len(horizons), 4)
    rows = -(-len(horizons) // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 3.2 * rows), squeeze=False,
                             sharey=True)
    for ax, n in zip(axes.flat, horizons):
        _plot_trace(ax, traces[n].iloc[:30])
        ax.set_title(f'n = {n}')
        ax.grid(alpha=0.3, linestyle='--')
        ax.tick_params(axis='x', labelrotation=45)
    for ax in list(axes.flat)[len(horizons):]:
        ax.axis('off')
    axes.flat[0].legend(loc='best', fontsize=8)
    fig.suptitle(f'{args.asset}: Next n-Day Predictions (first 30 test days)', fontweight='bold')

    plt.tight_layout()
    plt.savefig(OUTPUT_DIR / 'fig_n_day_grid.pdf', format='pdf')
    plt.savefig(OUTPUT_DIR / 'fig_n_day_grid.png', format='png')
    plt.close()


def generate_feature_panel(args):
    """Figure 3: the input feeds on a shared date axis."""
    feeds = [(label, path) for label, path in
             (('Rewards', args.rewards), ('Price (USD)', args.price), ('Search trends', args.trends))
             if path]
    if not feeds:
        raise FileNotFoundError("pass --rewards (and optionally --price, --trends)")

    fig, axes = plt.subplots(len(feeds), 1, figsize=(11, 2.6 * len(feeds)), sharex=True,
                             squeeze=False)
    for ax, (label, path), color in zip(axes[:, 0], feeds, ('#3498db', '#e67e22', '#9b59b6')):
        series = read_feed(path).to_pandas()
        ax.plot(series.index, series.values, color=color, linewidth=1.2)
        ax.set_ylabel(label, fontweight='bold')
        ax.grid(alpha=0.3, linestyle='--')
    axes[0, 0].set_title(f'{args.asset}: Input Features', fontweight='bold')
    fig.autofmt_xdate()

    plt.tight_layout()
    plt.savefig(OUTPUT_DIR / 'fig_feature_panel.pdf', format='pdf')
    plt.savefig(OUTPUT_DIR / 'fig_feature_panel.png', format='png')
    plt.close()


def main(argv=None):
    """Generate all figures."""
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument('--results', default=str(SCRIPT_DIR.parent.parent / 'results'),
                        help='Directory holding trace_<method>_<n>.csv files')
    parser.add_argument('--rewards', help='Rewards feed CSV for the feature panel')
    parser.add_argument('--price', help='Price feed CSV')
    parser.add_argument('--trends', help='Trends feed CSV')
    parser.add_argument('--asset', default='ASSET')
    args = parser.parse_args(argv)
    OUTPUT_DIR.mkdir(exist_ok=True)

    print("="*80)
    print("Generating Staking Rewards Figures")
    print("="*80)
    print()

    figures = [
        ('fig_next_day_predictions', generate_next_day_predictions),
        ('fig_n_day_grid', generate_n_day_grid),
        ('fig_feature_panel', generate_feature_panel),
    ]

    failed = 0
    for name, func in figures:
        print(f"Generating {name}...", end=' ')
        try:
            func(args)
            print("✓")
        except Exception as e:
            failed += 1
            print(f"✗ Error: {e}")

    print()
    print("="*80)
    print(f"Figures saved to: {OUTPUT_DIR}")
    print("="*80)
    return 1 if failed else 0


if __name__ == '__main__':
    raise SystemExit(main())
