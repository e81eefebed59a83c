"""Shared fixtures: small synthetic frames with known forecasts."""

import os
import sys

import numpy as np
import pytest

# Add scripts/ to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from ingest import SynthSpec, generate  # noqa: E402
from series_core import DailySeries, FeatureFrame  # noqa: E402


@pytest.fixture
def constant_frame():
    return FeatureFrame(generate(SynthSpec(kind="constant", level=0.05, length=150)))


@pytest.fixture
def trend_frame():
    return FeatureFrame(generate(SynthSpec(kind="linear_trend", level=1.0, slope=0.01, length=150)))


@pytest.fixture
def noise_frame():
    return FeatureFrame(generate(SynthSpec(kind="sine_noise", level=1.0, amplitude=0.1,
                                           period=21, sigma=0.02, length=180, seed=3)))


@pytest.fixture
def three_feed_frame():
    n = 180
    rewards = generate(SynthSpec(kind="ar1", level=5.0, phi=0.8, sigma=0.05, length=n, seed=11))
    price = generate(SynthSpec(kind="sine_noise", level=2000.0, amplitude=150.0, period=45,
                               sigma=20.0, length=n, seed=12), name="price")
    trends = DailySeries(rewards.dates, np.round(50 + 10 * np.sin(np.arange(n) / 5.0)), name="trends")
    return FeatureFrame(rewards, price, trends)


@pytest.fixture
def write_csv(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return write
