"""Shared builders for the test suite."""

from __future__ import annotations

import datetime as dt

from crowdcast.ingestion import OhlcvWeekly, SviMatrix, TweetRecord
from crowdcast.series import WeekStamp, WeeklySeries

FRIDAY0 = dt.date(2024, 1, 5)
UTC = dt.timezone.utc


def ws(i: int = 0) -> WeekStamp:
    """The i-th Friday week stamp from the suite's base date."""
    return WeekStamp(FRIDAY0 + dt.timedelta(weeks=i))


def series(values, name: str = "s", start: int = 0) -> WeeklySeries:
    return WeeklySeries(name, ws(start), tuple(values))


def tweet(tid: str, when: dt.datetime, text: str = "market words",
          label: str | None = None) -> TweetRecord:
    return TweetRecord(tid, when, text, label)


def bar(i: int, o: float, h: float, lo: float, c: float,
        v: float = 1000.0) -> OhlcvWeekly:
    return OhlcvWeekly(ws(i), o, h, lo, c, v)


def flat_bar(i: int, price: float = 100.0, v: float = 1000.0) -> OhlcvWeekly:
    return OhlcvWeekly(ws(i), price, price, price, price, v)


def svi_matrix(columns: dict[str, list[float]], start: int = 0) -> SviMatrix:
    terms = tuple(columns)
    n = len(next(iter(columns.values())))
    weeks = tuple(ws(start + i) for i in range(n))
    rows = tuple(tuple(columns[t][i] for t in terms) for i in range(n))
    return SviMatrix(weeks=weeks, terms=terms, volumes=rows)
