"""Weekly sentiment and financial feature construction.

Sentiment side: per-window bullishness, agreement and message volume over
the weekday/weekend tweet tallies, ten series per security.  Financial
side: log returns in percent, range-based weekly volatility from OHLC bars,
and log trading volume.  All outputs are :class:`~crowdcast.series.WeeklySeries`
aligned to a common week range.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .ingestion import OhlcvWeekly, TweetBuckets
from .sentiment import NEGATIVE, POSITIVE, SentimentError
from .series import (
    MISSING,
    SeriesError,
    WeekStamp,
    WeeklySeries,
    align,
    is_missing,
)

__all__ = [
    "WindowTally",
    "TwitterFeatureSet",
    "SecurityFeatures",
    "bullishness",
    "agreement",
    "message_volume",
    "weekly_returns",
    "gk_volatility",
    "count_buckets",
    "build_feature_sets",
]

logger = logging.getLogger(__name__)

_GK_CONST = 2.0 * math.log(2.0) - 1.0


@dataclass(frozen=True)
class WindowTally:
    """Positive/negative tweet counts for one week's WD and WK windows."""

    week: WeekStamp
    wd_positive: int
    wd_negative: int
    wk_positive: int
    wk_negative: int


@dataclass(frozen=True)
class TwitterFeatureSet:
    """The ten per-security sentiment series (five features x WD/WK)."""

    security: str
    positive_wd: WeeklySeries
    negative_wd: WeeklySeries
    bullishness_wd: WeeklySeries
    msg_volume_wd: WeeklySeries
    agreement_wd: WeeklySeries
    positive_wk: WeeklySeries
    negative_wk: WeeklySeries
    bullishness_wk: WeeklySeries
    msg_volume_wk: WeeklySeries
    agreement_wk: WeeklySeries

    def as_dict(self) -> dict[str, WeeklySeries]:
        return {
            name: getattr(self, name)
            for name in (
                "positive_wd", "negative_wd", "bullishness_wd",
                "msg_volume_wd", "agreement_wd",
                "positive_wk", "negative_wk", "bullishness_wk",
                "msg_volume_wk", "agreement_wk",
            )
        }


@dataclass(frozen=True)
class SecurityFeatures:
    """Weekly financial series for one security."""

    security: str
    close: WeeklySeries
    returns: WeeklySeries
    volatility: WeeklySeries
    log_volume: WeeklySeries
    vix: WeeklySeries

    def as_dict(self) -> dict[str, WeeklySeries]:
        return {
            name: getattr(self, name)
            for name in ("close", "returns", "volatility", "log_volume", "vix")
        }


def bullishness(pos: int, neg: int) -> float:
    """Log share of surplus positive signals: ln((1+pos)/(1+neg))."""
    if pos < 0 or neg < 0:
        raise ValueError("counts must be non-negative")
    return math.log((1.0 + pos) / (1.0 + neg))


def agreement(pos: int, neg: int) -> float:
    """Unanimity of a window in [0, 1]; NaN when the window is empty.

    1 when all messages share one polarity, 0 at a perfect split.  The
    imbalance ratio is taken in absolute value so the radicand stays in
    [0, 1] regardless of which polarity dominates.
    """
    if pos < 0 or neg < 0:
        raise ValueError("counts must be non-negative")
    total = pos + neg
    if total == 0:
        return MISSING
    return 1.0 - math.sqrt(1.0 - abs(pos - neg) / total)


def message_volume(count: int) -> float:
    """Log message volume, shifted so zero-tweet windows stay finite."""
    if count < 0:
        raise ValueError("count must be non-negative")
    return math.log1p(count)


def weekly_returns(close: WeeklySeries) -> WeeklySeries:
    """Week-over-week log returns in percent; length shrinks by one."""
    if len(close) < 2:
        raise SeriesError("returns need at least two closing values")
    vals = []
    for i, (a, b) in enumerate(zip(close.values, close.values[1:])):
        if a <= 0 or b <= 0:
            raise SeriesError(
                f"non-positive close in {close.name!r} near week {close.start.shift(i)}"
            )
        vals.append((math.log(b) - math.log(a)) * 100.0)
    return WeeklySeries("returns", close.start.shift(1), tuple(vals))


def _gk_term(bar: OhlcvWeekly) -> float:
    hl = math.log(bar.high / bar.low)
    co = math.log(bar.close / bar.open)
    term = 0.5 * hl * hl - _GK_CONST * co * co
    if term < 0:
        logger.warning(
            "negative range-volatility term for week %s (degenerate bar); "
            "clamped to zero", bar.week,
        )
        return 0.0
    return term


def gk_volatility(bars: Sequence[OhlcvWeekly]) -> float:
    """Range-based volatility over *n* bars from open/high/low/close.

    sigma = sqrt((1/n) sum[ 0.5 ln(H/L)^2 - (2 ln 2 - 1) ln(C/O)^2 ]).
    Degenerate bars (H = L with C != O) would make a term negative; those
    terms are clamped to zero with a warning.
    """
    if not bars:
        raise ValueError("volatility needs at least one bar")
    return math.sqrt(sum(_gk_term(b) for b in bars) / len(bars))


def count_buckets(buckets: Mapping[WeekStamp, TweetBuckets]) -> list[WindowTally]:
    """Reduce labeled weekly tweet buckets to per-window sentiment counts."""
    tallies = []
    for week in sorted(buckets):
        b = buckets[week]
        for tw in b.weekday + b.weekend:
            if tw.label not in (POSITIVE, NEGATIVE):
                raise SentimentError(f"tweet {tw.id!r} has no sentiment label")
        tallies.append(
            WindowTally(
                week=week,
                wd_positive=sum(1 for t in b.weekday if t.label == POSITIVE),
                wd_negative=sum(1 for t in b.weekday if t.label == NEGATIVE),
                wk_positive=sum(1 for t in b.weekend if t.label == POSITIVE),
                wk_negative=sum(1 for t in b.weekend if t.label == NEGATIVE),
            )
        )
    return tallies


def _sentiment_series(
    security: str, tallies: Sequence[WindowTally]
) -> TwitterFeatureSet:
    weeks = [t.week for t in tallies]
    for a, b in zip(weeks, weeks[1:]):
        if b.weeks_since(a) != 1:
            raise SeriesError(f"tally weeks must be consecutive; gap after {a}")
    start = weeks[0]

    def mk(name: str, values: Iterable[float]) -> WeeklySeries:
        return WeeklySeries(name, start, tuple(values))

    return TwitterFeatureSet(
        security=security,
        positive_wd=mk("positive_wd", (t.wd_positive for t in tallies)),
        negative_wd=mk("negative_wd", (t.wd_negative for t in tallies)),
        bullishness_wd=mk(
            "bullishness_wd", (bullishness(t.wd_positive, t.wd_negative) for t in tallies)
        ),
        msg_volume_wd=mk(
            "msg_volume_wd", (message_volume(t.wd_positive + t.wd_negative) for t in tallies)
        ),
        agreement_wd=mk(
            "agreement_wd", (agreement(t.wd_positive, t.wd_negative) for t in tallies)
        ),
        positive_wk=mk("positive_wk", (t.wk_positive for t in tallies)),
        negative_wk=mk("negative_wk", (t.wk_negative for t in tallies)),
        bullishness_wk=mk(
            "bullishness_wk", (bullishness(t.wk_positive, t.wk_negative) for t in tallies)
        ),
        msg_volume_wk=mk(
            "msg_volume_wk", (message_volume(t.wk_positive + t.wk_negative) for t in tallies)
        ),
        agreement_wk=mk(
            "agreement_wk", (agreement(t.wk_positive, t.wk_negative) for t in tallies)
        ),
    )


def build_feature_sets(
    security: str,
    tallies: Sequence[WindowTally],
    bars: Sequence[OhlcvWeekly],
    vix: WeeklySeries,
    price: WeeklySeries | None = None,
) -> tuple[TwitterFeatureSet, SecurityFeatures]:
    """Assemble the sentiment and financial feature sets on aligned weeks.

    *price* overrides the bar closes as the target price series (used for
    securities quoted outside the OHLCV file).  Undefined agreement weeks
    propagate as missing markers.
    """
    if not tallies:
        raise SeriesError("no sentiment tallies supplied")
    if not bars:
        raise SeriesError("no OHLCV bars supplied")
    for a, b in zip(bars, bars[1:]):
        if b.week.weeks_since(a.week) != 1:
            raise SeriesError(f"OHLCV weeks must be consecutive; gap after {a.week}")

    tw = _sentiment_series(security, tallies)
    bar_start = bars[0].week
    close = price if price is not None else WeeklySeries(
        "close", bar_start, tuple(b.close for b in bars)
    )
    close = close.rename("close")
    returns = weekly_returns(close)
    volatility = WeeklySeries(
        "volatility", bar_start, tuple(gk_volatility([b]) for b in bars)
    )
    log_volume = WeeklySeries(
        "log_volume",
        bar_start,
        tuple(math.log(b.volume) if b.volume > 0 else MISSING for b in bars),
    )

    ordered = list(tw.as_dict().values()) + [
        close, returns, volatility, log_volume, vix.rename("vix")
    ]
    aligned = align(ordered)
    tw_aligned = TwitterFeatureSet(security, *aligned[:10])
    fin = SecurityFeatures(security, *aligned[10:])
    return tw_aligned, fin
