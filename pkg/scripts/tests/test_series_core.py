import numpy as np
import pandas as pd
import pytest

from series_core import (
    DailySeries,
    EmptyIntersection,
    FeatureFrame,
    GapTooLarge,
    InvalidSeries,
    StakingError,
    align,
    repair_gaps,
)


def daily(start, values, name="value"):
    dates = np.datetime64(start, "D") + np.arange(len(values))
    return DailySeries(dates, values, name=name)


# ---------------------------------------------------------------------------
# DailySeries
# ---------------------------------------------------------------------------

def test_series_from_pairs_keeps_order_and_values():
    s = DailySeries.from_pairs([("2021-06-23", 0.051), ("2021-06-24", 0.050)], name="reward_rate")
    assert len(s) == 2
    assert s.start == np.datetime64("2021-06-23")
    assert s.end == np.datetime64("2021-06-24")
    assert s.values.tolist() == [0.051, 0.050]
    assert s.is_contiguous


@pytest.mark.parametrize("dates, values", [
    ([], []),
    (["2022-01-02", "2022-01-01"], [1.0, 2.0]),
    (["2022-01-01", "2022-01-01"], [1.0, 2.0]),
    (["2022-01-01", "2022-01-02"], [1.0, np.nan]),
    (["2022-01-01", "2022-01-02"], [1.0, np.inf]),
    (["2022-01-01"], [1.0, 2.0]),
])
def test_series_rejects_invalid_input(dates, values):
    with pytest.raises(InvalidSeries):
        DailySeries(np.array(dates, dtype="datetime64[D]"), values)


def test_series_is_read_only():
    s = daily("2022-01-01", [1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0


def test_series_pandas_views_round_trip():
    s = daily("2022-01-01", [1.0, 2.0, 3.0], name="price")
    p = s.to_pandas()
    assert p.name == "price"
    assert list(p.index.strftime("%Y-%m-%d")) == ["2022-01-01", "2022-01-02", "2022-01-03"]
    assert DailySeries.from_pandas(p) == s


def test_series_slice_and_between():
    s = daily("2022-01-01", [1.0, 2.0, 3.0, 4.0, 5.0])
    assert s.slice(1, 3).values.tolist() == [2.0, 3.0]
    assert s.between(np.datetime64("2022-01-02"), np.datetime64("2022-01-04")).values.tolist() == [2, 3, 4]
    assert s.mean() == 3.0


def test_errors_share_one_base_with_stage():
    assert issubclass(GapTooLarge, StakingError)
    assert issubclass(StakingError, ValueError)
    assert GapTooLarge.stage == "ingest"
    assert EmptyIntersection.stage == "align"


# ---------------------------------------------------------------------------
# repair_gaps
# ---------------------------------------------------------------------------

def test_repair_gaps_forward_fills_short_gap():
    s = DailySeries.from_pairs([("2022-01-01", 5.0), ("2022-01-02", 6.0), ("2022-01-04", 8.0)])
    repaired = repair_gaps(s, max_gap=1)
    assert repaired.dates.tolist() == list(pd.date_range("2022-01-01", "2022-01-04").date)
    assert repaired.values.tolist() == [5.0, 6.0, 6.0, 8.0]
    assert repaired.is_contiguous


def test_repair_gaps_leaves_contiguous_series_unchanged():
    s = daily("2022-01-01", [1.0, 2.0, 3.0])
    for max_gap in (0, 1, 3, 10):
        assert repair_gaps(s, max_gap) == s


def test_repair_gaps_rejects_long_gap():
    s = DailySeries.from_pairs([("2022-01-01", 5.0), ("2022-01-09", 8.0)])
    with pytest.raises(GapTooLarge, match="7 missing days"):
        repair_gaps(s, max_gap=3)


def test_repair_gaps_is_idempotent():
    s = DailySeries.from_pairs([("2022-01-01", 1.0), ("2022-01-04", 2.0), ("2022-01-05", 3.0),
                                ("2022-01-07", 4.0)])
    once = repair_gaps(s, max_gap=3)
    assert repair_gaps(once, max_gap=3) == once
    assert len(once) == 7


def test_repair_gaps_keeps_name():
    s = DailySeries.from_pairs([("2022-01-01", 1.0), ("2022-01-03", 2.0)], name="trends")
    assert repair_gaps(s).name == "trends"


# ---------------------------------------------------------------------------
# align / FeatureFrame
# ---------------------------------------------------------------------------

def test_align_intersects_ranges():
    rewards = daily("2022-01-01", np.arange(10.0))
    price = daily("2022-01-03", np.arange(10.0) + 100)
    frame = align(rewards, price=price)
    assert len(frame) == 8
    assert frame.date_range == (np.datetime64("2022-01-03"), np.datetime64("2022-01-10"))
    assert frame.rewards.values[0] == 2.0
    assert frame.price.values[0] == 100.0
    assert frame.trends is None
    assert frame.features == ("rewards", "price")


def test_align_rewards_only_keeps_full_range():
    rewards = daily("2022-01-01", np.arange(10.0))
    frame = align(rewards)
    assert frame.rewards == rewards


def test_align_disjoint_ranges():
    rewards = daily("2022-01-01", np.arange(5.0))
    trends = daily("2022-02-01", np.arange(5.0))
    with pytest.raises(EmptyIntersection):
        align(rewards, trends=trends)


def test_align_depends_on_presence_not_order():
    rewards = daily("2022-01-01", np.arange(20.0))
    price = daily("2022-01-04", np.arange(20.0))
    trends = daily("2021-12-30", np.arange(15.0))
    assert align(rewards, price, trends) == align(rewards, trends=trends, price=price)
    assert len(align(rewards, price, trends)) == 10


def test_align_requires_repaired_feeds():
    gappy = DailySeries.from_pairs([("2022-01-01", 1.0), ("2022-01-03", 2.0)])
    with pytest.raises(InvalidSeries):
        align(gappy)


def test_frame_rejects_mismatched_dates():
    with pytest.raises(InvalidSeries):
        FeatureFrame(daily("2022-01-01", [1.0, 2.0]), price=daily("2022-01-02", [1.0, 2.0]))


def test_frame_slice_and_with_rewards(three_feed_frame):
    part = three_feed_frame.slice(10, 20)
    assert len(part) == 10
    assert part.features == ("rewards", "price", "trends")
    assert part.price == three_feed_frame.price.slice(10, 20)

    doubled = three_feed_frame.with_rewards(three_feed_frame.rewards.values * 2)
    np.testing.assert_array_equal(doubled.rewards.values, three_feed_frame.rewards.values * 2)
    assert doubled.price == three_feed_frame.price


def test_frame_series_lookup(three_feed_frame):
    assert three_feed_frame.series("trends") is three_feed_frame.trends
    with pytest.raises(KeyError):
        three_feed_frame.series("volume")
