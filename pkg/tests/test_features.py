import datetime as dt
import logging
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crowdcast.features import (
    WindowTally,
    agreement,
    build_feature_sets,
    bullishness,
    count_buckets,
    gk_volatility,
    message_volume,
    weekly_returns,
)
from crowdcast.ingestion import OhlcvWeekly, TweetBuckets, window_tweets
from crowdcast.series import SeriesError, is_missing
from util import UTC, bar, flat_bar, series, tweet, ws

counts = st.integers(0, 10_000)


class TestBullishness:
    def test_empty_window_is_zero(self):
        assert bullishness(0, 0) == 0.0

    def test_nine_to_zero_is_ln_ten(self):
        assert math.isclose(bullishness(9, 0), math.log(10), abs_tol=1e-9)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            bullishness(-1, 0)

    @given(counts, counts)
    def test_antisymmetry(self, p, n):
        assert math.isclose(
            bullishness(p, n), -bullishness(n, p), abs_tol=1e-12
        )


class TestAgreement:
    def test_unanimous_is_one(self):
        assert math.isclose(agreement(10, 0), 1.0, abs_tol=1e-9)
        assert math.isclose(agreement(0, 10), 1.0, abs_tol=1e-9)

    def test_even_split_is_zero(self):
        assert math.isclose(agreement(5, 5), 0.0, abs_tol=1e-9)

    def test_empty_window_undefined(self):
        assert is_missing(agreement(0, 0))

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            agreement(0, -1)

    @given(counts, counts, st.integers(1, 50))
    def test_scale_free(self, p, n, k):
        if p + n == 0:
            assert is_missing(agreement(k * p, k * n))
        else:
            assert math.isclose(
                agreement(k * p, k * n), agreement(p, n), abs_tol=1e-12
            )

    @given(counts, counts)
    def test_bounded_in_unit_interval(self, p, n):
        a = agreement(p, n)
        if not is_missing(a):
            assert -1e-12 <= a <= 1.0 + 1e-12


class TestMessageVolume:
    def test_zero_tweets(self):
        assert message_volume(0) == 0.0

    def test_one_tweet_is_ln_two(self):
        assert math.isclose(message_volume(1), math.log(2), abs_tol=1e-9)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            message_volume(-1)

    @given(st.integers(0, 10_000))
    def test_doubling_strictly_increases(self, c):
        assert message_volume(2 * c + 1) > message_volume(c)


class TestWeeklyReturns:
    def test_no_change(self):
        assert weekly_returns(series([100, 100], name="close")).values == (0.0,)

    def test_one_percent_log_return(self):
        out = weekly_returns(series([100.0, 100.0 * math.e ** 0.01]))
        assert math.isclose(out.values[0], 1.0, abs_tol=1e-9)

    def test_hand_computed_ten_percent_move(self):
        out = weekly_returns(series([100.0, 110.0]))
        assert math.isclose(out.values[0], 9.531, abs_tol=1e-4)
        assert math.isclose(out.values[0], math.log(1.1) * 100, abs_tol=1e-9)

    def test_starts_one_week_later(self):
        out = weekly_returns(series([100, 110, 121]))
        assert out.start == ws(1)
        assert len(out) == 2

    def test_non_positive_close_rejected(self):
        with pytest.raises(SeriesError):
            weekly_returns(series([100.0, -1.0]))

    def test_too_short_rejected(self):
        with pytest.raises(SeriesError):
            weekly_returns(series([100.0]))

    @given(st.floats(-30, 30), st.integers(3, 30))
    def test_exponential_path_gives_constant_returns(self, r, n):
        closes = [100.0 * math.exp(r * t / 100.0) for t in range(n)]
        out = weekly_returns(series(closes))
        np.testing.assert_allclose(out.values, r, atol=1e-9)


class TestGkVolatility:
    def test_degenerate_bars_give_zero(self):
        assert gk_volatility([flat_bar(0), flat_bar(1)]) == 0.0

    def test_single_bar_oracle(self):
        # H/L = e with C = O: sigma = sqrt(0.5 * ln(e)^2) = sqrt(0.5)
        b = OhlcvWeekly(ws(0), 100.0, 100.0 * math.e, 100.0, 100.0, 0.0)
        assert math.isclose(gk_volatility([b]), math.sqrt(0.5), abs_tol=1e-9)

    def test_negative_term_clamped_with_warning(self, caplog):
        # H = L with C != O makes the per-bar term negative; such bars fail
        # the OHLC invariant on ingest but can still reach the formula as a
        # data artifact, so the clamp is exercised with a bar stand-in
        degenerate = SimpleNamespace(
            week=ws(0), open=100.0, high=105.0, low=105.0, close=105.0
        )
        with caplog.at_level(logging.WARNING, logger="crowdcast.features"):
            out = gk_volatility([degenerate])
        assert out == 0.0
        assert any("clamped" in r.message for r in caplog.records)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            gk_volatility([])

    @given(st.floats(0.1, 10.0))
    def test_invariant_under_uniform_scaling(self, lam):
        bars = [bar(0, 10.0, 12.0, 9.0, 11.0), bar(1, 11.0, 11.5, 10.0, 10.5)]
        scaled = [
            OhlcvWeekly(b.week, b.open * lam, b.high * lam, b.low * lam,
                        b.close * lam, b.volume)
            for b in bars
        ]
        assert math.isclose(
            gk_volatility(scaled), gk_volatility(bars), rel_tol=1e-9
        )


def _tally(i, wd_p, wd_n, wk_p, wk_n):
    return WindowTally(ws(i), wd_p, wd_n, wk_p, wk_n)


class TestCountBuckets:
    def test_conserves_window_counts(self):
        stamps = [
            ("a", dt.datetime(2024, 1, 2, 12, tzinfo=UTC), "positive"),
            ("b", dt.datetime(2024, 1, 3, 12, tzinfo=UTC), "negative"),
            ("c", dt.datetime(2024, 1, 6, 3, tzinfo=UTC), "positive"),
            ("d", dt.datetime(2024, 1, 9, 12, tzinfo=UTC), "positive"),
        ]
        tweets = [tweet(i, t, "words", lbl) for i, t, lbl in stamps]
        windowed = window_tweets(tweets, start=ws(0), end=ws(1))
        tallies = count_buckets(windowed.buckets)
        total = sum(
            t.wd_positive + t.wd_negative + t.wk_positive + t.wk_negative
            for t in tallies
        )
        bucket_total = sum(
            len(b.weekday) + len(b.weekend)
            for b in windowed.buckets.values()
        )
        assert total == bucket_total == len(tweets)
        by_week = {t.week: t for t in tallies}
        assert (by_week[ws(0)].wd_positive, by_week[ws(0)].wd_negative) == (1, 1)
        assert by_week[ws(1)].wk_positive == 1
        assert by_week[ws(1)].wd_positive == 1

    def test_unlabeled_tweet_rejected(self):
        buckets = {ws(0): TweetBuckets(
            weekday=[tweet("a", dt.datetime(2024, 1, 2, 12, tzinfo=UTC))]
        )}
        with pytest.raises(Exception):
            count_buckets(buckets)


class TestBuildFeatureSets:
    def _bars(self, n, start=0):
        return [bar(start + i, 100.0 + i, 103.0 + i, 99.0 + i, 101.0 + i)
                for i in range(n)]

    def test_ten_weeks_aligned(self):
        tallies = [_tally(i, 3, 1, 2, 0) for i in range(10)]
        vix = series([20.0] * 10, name="vix")
        tw, fin = build_feature_sets("SEC", tallies, self._bars(10), vix)
        for s in tw.as_dict().values():
            assert len(s) <= 10
        lengths = {len(s) for s in tw.as_dict().values()} | {
            len(s) for s in fin.as_dict().values()
        }
        assert len(lengths) == 1
        starts = {s.start for s in tw.as_dict().values()} | {
            s.start for s in fin.as_dict().values()
        }
        assert len(starts) == 1

    def test_zero_tweet_week_feature_values(self):
        tallies = [_tally(i, 0, 0, 0, 0) for i in range(3)] + [
            _tally(3, 2, 1, 1, 0)
        ]
        vix = series([20.0] * 4, name="vix")
        tw, _ = build_feature_sets("SEC", tallies, self._bars(4), vix)
        # week 1 (post-alignment start) had zero tweets in both windows
        assert tw.bullishness_wd.value_at(ws(1)) == 0.0
        assert tw.msg_volume_wd.value_at(ws(1)) == 0.0
        assert is_missing(tw.agreement_wd.value_at(ws(1)))

    def test_agreement_missing_propagates_into_series(self):
        tallies = [_tally(i, 0, 0, 1, 0) for i in range(4)]
        vix = series([20.0] * 4, name="vix")
        tw, _ = build_feature_sets("SEC", tallies, self._bars(4), vix)
        assert all(is_missing(v) for v in tw.agreement_wd.values)

    def test_weekend_only_tweets(self):
        tallies = [_tally(i, 0, 0, 3, 1) for i in range(4)]
        vix = series([20.0] * 4, name="vix")
        tw, _ = build_feature_sets("SEC", tallies, self._bars(4), vix)
        assert all(v == 0.0 for v in tw.positive_wd.values)
        assert all(v == 0.0 for v in tw.msg_volume_wd.values)
        assert all(v > 0 for v in tw.msg_volume_wk.values)

    def test_returns_trim_first_week(self):
        tallies = [_tally(i, 1, 1, 1, 1) for i in range(5)]
        vix = series([20.0] * 5, name="vix")
        tw, fin = build_feature_sets("SEC", tallies, self._bars(5), vix)
        assert fin.returns.start == ws(1)
        assert tw.positive_wd.start == ws(1)

    def test_zero_volume_week_is_missing_log_volume(self):
        bars = [
            OhlcvWeekly(ws(0), 100, 103, 99, 101, 0.0),
            OhlcvWeekly(ws(1), 101, 104, 100, 102, 500.0),
        ]
        tallies = [_tally(i, 1, 1, 1, 1) for i in range(2)]
        vix = series([20.0, 20.0], name="vix")
        _, fin = build_feature_sets("SEC", tallies, bars, vix)
        assert is_missing(fin.log_volume.values[0]) or len(fin.log_volume) == 1

    def test_gapped_bars_rejected(self):
        bars = [bar(0, 100, 103, 99, 101), bar(2, 100, 103, 99, 101)]
        tallies = [_tally(i, 1, 1, 1, 1) for i in range(3)]
        vix = series([20.0] * 3, name="vix")
        with pytest.raises(SeriesError):
            build_feature_sets("SEC", tallies, bars, vix)

    def test_empty_inputs_rejected(self):
        vix = series([20.0] * 3, name="vix")
        with pytest.raises(SeriesError):
            build_feature_sets("SEC", [], self._bars(3), vix)
        with pytest.raises(SeriesError):
            build_feature_sets("SEC", [_tally(0, 1, 1, 1, 1)], [], vix)
