"""File-based parsers for tweet, market, and search-volume data.

All inputs are plain files rather than live APIs, which keeps runs
reproducible.  Parsers are reentrant pure functions over their streams;
multiple files may be parsed concurrently.

Wire formats
------------
* Tweet CSV: header ``id,timestamp,text[,label]``; timestamp ISO-8601 UTC.
* Tweet JSON-lines: one object per line with keys ``id``, ``timestamp``,
  ``text`` and optional ``label``.
* OHLCV CSV: header ``date,open,high,low,close,volume``; date ISO-8601.
* Search-volume CSV: header ``date,<term1>,<term2>,...``.
* Weekly value CSV (prices, volatility indices): header ``date,value``.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

from .series import MISSING, SeriesError, WeekStamp, WeeklySeries

__all__ = [
    "TweetRecord",
    "TweetParseResult",
    "TweetBuckets",
    "WindowedTweets",
    "OhlcvWeekly",
    "OhlcvParseResult",
    "SviMatrix",
    "IngestionError",
    "CorpusRejectedError",
    "parse_tweets",
    "window_tweets",
    "parse_ohlcv",
    "parse_svi",
    "parse_weekly_values",
    "closing_week",
]

_UTC = dt.timezone.utc

#: Market close that ends a trading week: Friday 21:00 UTC, closed-right.
CLOSE_HOUR = 21


class IngestionError(ValueError):
    """Input file violates its declared format."""


class CorpusRejectedError(IngestionError):
    """More than half of a tweet corpus was malformed."""


@dataclass(frozen=True)
class TweetRecord:
    id: str
    timestamp: dt.datetime
    text: str
    label: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise IngestionError("tweet id must be non-empty")
        if not self.text.strip():
            raise IngestionError("tweet text must be non-empty")
        if self.timestamp.tzinfo is None:
            object.__setattr__(self, "timestamp", self.timestamp.replace(tzinfo=_UTC))
        if self.label is not None and self.label not in ("positive", "negative"):
            raise IngestionError(f"unknown sentiment label {self.label!r}")


@dataclass(frozen=True)
class TweetParseResult:
    records: tuple[TweetRecord, ...]
    skipped: int
    duplicates: int


@dataclass
class TweetBuckets:
    """Per-week tweet split: market-active days vs the preceding weekend."""
    weekday: list[TweetRecord] = field(default_factory=list)
    weekend: list[TweetRecord] = field(default_factory=list)


@dataclass(frozen=True)
class WindowedTweets:
    buckets: dict[WeekStamp, TweetBuckets]
    dropped: int


@dataclass(frozen=True)
class OhlcvWeekly:
    week: WeekStamp
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self) -> None:
        prices = (self.open, self.high, self.low, self.close)
        if any(p <= 0 or not math.isfinite(p) for p in prices):
            raise IngestionError(f"non-positive price in bar for week {self.week}")
        if not (self.low <= min(self.open, self.close)
                and max(self.open, self.close) <= self.high):
            raise IngestionError(
                f"bar for week {self.week} violates L <= O,C <= H"
            )
        if self.volume < 0:
            raise IngestionError(f"negative volume in bar for week {self.week}")


@dataclass(frozen=True)
class OhlcvParseResult:
    bars: tuple[OhlcvWeekly, ...]
    rejected: tuple[tuple[int, str], ...]  # (row number, reason)


@dataclass(frozen=True)
class SviMatrix:
    """Week-by-term matrix of weekly search volumes."""

    weeks: tuple[WeekStamp, ...]
    terms: tuple[str, ...]
    volumes: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if len(self.terms) < 2:
            raise IngestionError("search-volume matrix needs at least 2 terms")
        if len(self.volumes) != len(self.weeks):
            raise IngestionError("volume rows do not match week count")
        for row in self.volumes:
            if len(row) != len(self.terms):
                raise IngestionError("ragged volume row")
            if any(v < 0 for v in row):
                raise IngestionError("negative search volume")
        for a, b in zip(self.weeks, self.weeks[1:]):
            if b.weeks_since(a) != 1:
                raise IngestionError(
                    f"search-volume weeks must be consecutive; gap after {a}"
                )

    def column(self, term: str) -> WeeklySeries:
        j = self.terms.index(term)
        return WeeklySeries(term, self.weeks[0], tuple(r[j] for r in self.volumes))


def _as_stream(source: IO[str] | str) -> IO[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def _parse_timestamp(raw: str) -> dt.datetime:
    ts = dt.datetime.fromisoformat(raw.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=_UTC)
    return ts.astimezone(_UTC)


def closing_week(ts: dt.datetime) -> WeekStamp:
    """Map an instant to the week it belongs to under the Friday-close rule.

    Timestamps on or before Friday 21:00 UTC belong to the week that Friday
    closes; later timestamps roll into the following week.
    """
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=_UTC)
    ts = ts.astimezone(_UTC)
    d = ts.date()
    friday = d + dt.timedelta(days=(4 - d.weekday()) % 7)
    boundary = dt.datetime(friday.year, friday.month, friday.day,
                           CLOSE_HOUR, tzinfo=_UTC)
    if ts > boundary:
        friday += dt.timedelta(days=7)
    return WeekStamp(friday)


def friday_of(d: dt.date) -> WeekStamp:
    """The Friday closing the week a calendar date falls in.

    Monday through Friday map forward to that week's Friday; Saturday and
    Sunday belong to the following trading week.
    """
    ahead = (4 - d.weekday()) % 7
    if d.weekday() > 4:  # Sat/Sun roll into next week
        ahead = 4 + 7 - d.weekday()
    return WeekStamp(d + dt.timedelta(days=ahead))


def parse_tweets(source: IO[str] | str, format: str = "csv") -> TweetParseResult:
    """Parse a tweet corpus from CSV or JSON-lines.

    Malformed rows are skipped and counted; duplicate ids keep the first
    occurrence.  A corpus with more than 50% malformed rows is rejected
    outright.
    """
    stream = _as_stream(source)
    if format == "csv":
        rows = _tweet_rows_csv(stream)
    elif format in ("jsonl", "json-lines"):
        rows = _tweet_rows_jsonl(stream)
    else:
        raise IngestionError(f"unknown tweet format {format!r}")

    records: list[TweetRecord] = []
    seen: set[str] = set()
    skipped = 0
    duplicates = 0
    total = 0
    for row in rows:
        total += 1
        if row is None:
            skipped += 1
            continue
        try:
            rec = TweetRecord(
                id=str(row.get("id", "")).strip(),
                timestamp=_parse_timestamp(str(row["timestamp"])),
                text=str(row.get("text", "")),
                label=(str(row["label"]).strip() or None)
                if row.get("label") not in (None, "") else None,
            )
        except (IngestionError, KeyError, ValueError):
            skipped += 1
            continue
        if rec.id in seen:
            duplicates += 1
            continue
        seen.add(rec.id)
        records.append(rec)
    if total and skipped / total > 0.5:
        raise CorpusRejectedError(
            f"{skipped} of {total} tweet rows malformed; corpus rejected"
        )
    return TweetParseResult(tuple(records), skipped, duplicates)


def _tweet_rows_csv(stream: IO[str]) -> Iterable[Mapping | None]:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise IngestionError("empty tweet CSV")
    required = {"id", "timestamp", "text"}
    if not required.issubset(reader.fieldnames):
        raise IngestionError(
            f"tweet CSV must declare columns {sorted(required)}; "
            f"got {reader.fieldnames}"
        )
    for row in reader:
        yield row


def _tweet_rows_jsonl(stream: IO[str]) -> Iterable[Mapping | None]:
    for line in stream:
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            yield None
            continue
        yield obj if isinstance(obj, dict) else None


def window_tweets(
    tweets: Iterable[TweetRecord],
    start: WeekStamp | None = None,
    end: WeekStamp | None = None,
) -> WindowedTweets:
    """Bucket tweets into weekday/weekend windows per trading week.

    The weekday bucket of week t spans Monday 00:00 UTC through Friday
    21:00 UTC (closed-right).  The weekend bucket of week t covers the gap
    after the previous Friday's close up to (but not including) Monday
    00:00 UTC, i.e. the weekend *preceding* the trading week.  Tweets
    outside an explicit [start, end] range are dropped and counted.
    """
    assigned: list[tuple[WeekStamp, bool, TweetRecord]] = []
    for tw in tweets:
        week = closing_week(tw.timestamp)
        monday = dt.datetime.combine(
            week.week_end - dt.timedelta(days=4), dt.time(0), tzinfo=_UTC
        )
        is_weekend = tw.timestamp.astimezone(_UTC) < monday
        assigned.append((week, is_weekend, tw))

    if not assigned:
        return WindowedTweets({}, 0)

    lo = start or min(w for w, _, _ in assigned)
    hi = end or max(w for w, _, _ in assigned)
    buckets: dict[WeekStamp, TweetBuckets] = {
        lo.shift(i): TweetBuckets() for i in range(hi.weeks_since(lo) + 1)
    }
    dropped = 0
    for week, is_weekend, tw in assigned:
        bucket = buckets.get(week)
        if bucket is None:
            dropped += 1
            continue
        (bucket.weekend if is_weekend else bucket.weekday).append(tw)
    return WindowedTweets(buckets, dropped)


def parse_ohlcv(source: IO[str] | str) -> OhlcvParseResult:
    """Parse weekly OHLCV bars, rejecting invariant-violating rows.

    Output bars are sorted ascending by week; rejected rows carry their
    1-based data row number and a reason.
    """
    stream = _as_stream(source)
    reader = csv.DictReader(stream)
    required = ["date", "open", "high", "low", "close", "volume"]
    if reader.fieldnames is None or not set(required).issubset(reader.fieldnames):
        raise IngestionError(
            f"OHLCV CSV must declare columns {required}; got {reader.fieldnames}"
        )
    bars: dict[WeekStamp, OhlcvWeekly] = {}
    rejected: list[tuple[int, str]] = []
    for rowno, row in enumerate(reader, start=1):
        try:
            week = friday_of(dt.date.fromisoformat(row["date"].strip()))
            bar = OhlcvWeekly(
                week=week,
                open=float(row["open"]),
                high=float(row["high"]),
                low=float(row["low"]),
                close=float(row["close"]),
                volume=float(row["volume"]),
            )
        except (IngestionError, ValueError) as exc:
            rejected.append((rowno, str(exc)))
            continue
        if bar.week in bars:
            rejected.append((rowno, f"duplicate week {bar.week}"))
            continue
        bars[bar.week] = bar
    ordered = tuple(bars[w] for w in sorted(bars))
    return OhlcvParseResult(ordered, tuple(rejected))


def parse_svi(source: IO[str] | str) -> SviMatrix:
    """Parse a weekly search-volume matrix.

    Dates are mapped to the Friday closing their week (Google's Monday-dated
    weeks roll forward to that week's Friday).
    """
    stream = _as_stream(source)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestionError("empty search-volume CSV") from None
    if len(header) < 3:
        raise IngestionError(
            "search-volume CSV needs a date column and at least 2 term columns"
        )
    terms = tuple(t.strip() for t in header[1:])
    weeks: list[WeekStamp] = []
    rows: list[tuple[float, ...]] = []
    for rowno, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise IngestionError(f"ragged row {rowno} in search-volume CSV")
        try:
            week = friday_of(dt.date.fromisoformat(row[0].strip()))
        except ValueError:
            raise IngestionError(
                f"row {rowno}: {row[0]!r} is not an ISO date"
            ) from None
        try:
            values = tuple(float(v) for v in row[1:])
        except ValueError:
            raise IngestionError(f"row {rowno}: non-numeric volume") from None
        weeks.append(week)
        rows.append(values)
    order = sorted(range(len(weeks)), key=lambda i: weeks[i])
    return SviMatrix(
        weeks=tuple(weeks[i] for i in order),
        terms=terms,
        volumes=tuple(rows[i] for i in order),
    )


def parse_weekly_values(source: IO[str] | str, name: str) -> WeeklySeries:
    """Parse a two-column ``date,value`` CSV into a weekly series."""
    stream = _as_stream(source)
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or not {"date", "value"}.issubset(reader.fieldnames):
        raise IngestionError("weekly value CSV must declare columns date,value")
    pairs: dict[WeekStamp, float] = {}
    for rowno, row in enumerate(reader, start=1):
        try:
            week = friday_of(dt.date.fromisoformat(row["date"].strip()))
            value = float(row["value"])
        except ValueError as exc:
            raise IngestionError(f"row {rowno}: {exc}") from None
        if week in pairs:
            raise IngestionError(f"row {rowno}: duplicate week {week}")
        pairs[week] = value
    if not pairs:
        raise IngestionError("weekly value CSV contains no rows")
    ordered = sorted(pairs)
    for a, b in zip(ordered, ordered[1:]):
        if b.weeks_since(a) != 1:
            raise IngestionError(f"missing week between {a} and {b} in {name!r}")
    return WeeklySeries(name, ordered[0], tuple(pairs[w] for w in ordered))
