"""Weekly-calendar time series container and transformations.

Every series in the toolkit is a :class:`WeeklySeries`: a named, gapless,
Friday-aligned sequence of weekly observations.  Missing observations are
explicit NaN markers, never silently interpolated.  All values are immutable
after construction and every operation here is a pure function, so series
may be shared freely across threads.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

__all__ = [
    "MISSING",
    "WeekStamp",
    "WeeklySeries",
    "SeriesError",
    "AlignmentError",
    "align",
    "lag",
    "difference",
    "log_transform",
    "is_missing",
]

_FRIDAY = 4
_WEEK = dt.timedelta(days=7)

#: Explicit not-available marker for missing weekly observations.
MISSING = float("nan")


class SeriesError(ValueError):
    """A series operation violated its contract."""


class AlignmentError(SeriesError):
    """The requested series share no common week range."""


def is_missing(value: float) -> bool:
    """True when *value* is the explicit not-available marker."""
    return math.isnan(value)


@dataclass(frozen=True, order=True)
class WeekStamp:
    """A week identified by the Friday that closes it (21:00 UTC boundary).

    Consecutive stamps differ by exactly seven days; arithmetic is done in
    whole weeks.
    """

    week_end: dt.date

    def __post_init__(self) -> None:
        if self.week_end.weekday() != _FRIDAY:
            raise SeriesError(f"week_end {self.week_end} is not a Friday")

    @property
    def year(self) -> int:
        return self.week_end.year

    def shift(self, weeks: int) -> "WeekStamp":
        return WeekStamp(self.week_end + weeks * _WEEK)

    def weeks_since(self, other: "WeekStamp") -> int:
        return (self.week_end - other.week_end).days // 7

    def __str__(self) -> str:
        return self.week_end.isoformat()


@dataclass(frozen=True)
class WeeklySeries:
    """A named sequence of weekly values starting at ``start``.

    Values are stored densely, one per week with no gaps.  Use ``MISSING``
    (NaN) for weeks whose observation is unavailable.
    """

    name: str
    start: WeekStamp
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise SeriesError("series name must be non-empty")
        if len(self.values) < 1:
            raise SeriesError(f"series {self.name!r} must contain at least one value")
        vals = tuple(float(v) for v in self.values)
        for v in vals:
            if math.isinf(v):
                raise SeriesError(f"series {self.name!r} contains a non-finite value")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    @property
    def end(self) -> WeekStamp:
        return self.start.shift(len(self.values) - 1)

    @property
    def weeks(self) -> tuple[WeekStamp, ...]:
        return tuple(self.start.shift(i) for i in range(len(self.values)))

    def value_at(self, week: WeekStamp) -> float:
        offset = week.weeks_since(self.start)
        if offset < 0 or offset >= len(self.values):
            raise SeriesError(f"week {week} outside series {self.name!r}")
        return self.values[offset]

    def slice(self, start: WeekStamp, end: WeekStamp) -> "WeeklySeries":
        """Sub-series covering [start, end], both inclusive."""
        lo = start.weeks_since(self.start)
        hi = end.weeks_since(self.start)
        if lo < 0 or hi >= len(self.values) or hi < lo:
            raise SeriesError(
                f"slice [{start}, {end}] outside series {self.name!r} "
                f"[{self.start}, {self.end}]"
            )
        return WeeklySeries(self.name, start, self.values[lo : hi + 1])

    def with_values(self, values: Sequence[float], name: str | None = None,
                    start: WeekStamp | None = None) -> "WeeklySeries":
        return WeeklySeries(name or self.name, start or self.start, tuple(values))

    def rename(self, name: str) -> "WeeklySeries":
        return WeeklySeries(name, self.start, self.values)


def align(series: Sequence[WeeklySeries]) -> list[WeeklySeries]:
    """Truncate all series to their common (intersection) week range.

    Idempotent; preserves input order.  Raises :class:`AlignmentError`
    naming the offending series when the intersection is empty.
    """
    if not series:
        return []
    start = max(s.start for s in series)
    end = min(s.end for s in series)
    if end < start:
        names = ", ".join(repr(s.name) for s in series)
        raise AlignmentError(f"series have no common week range: {names}")
    return [s.slice(start, end) for s in series]


def lag(series: WeeklySeries, k: int) -> WeeklySeries:
    """Shift a series by *k* weeks: output at week t equals input at t - k.

    Positive *k* carries past values forward; length shrinks by ``|k|``.
    """
    n = len(series)
    if abs(k) >= n:
        raise SeriesError(
            f"lag {k} exhausts series {series.name!r} of length {n}"
        )
    if k == 0:
        return series
    if k > 0:
        return WeeklySeries(series.name, series.start.shift(k), series.values[:-k])
    return WeeklySeries(series.name, series.start, series.values[-k:])


def difference(series: WeeklySeries, d: int) -> WeeklySeries:
    """Apply first differencing *d* times; each pass shrinks length by one."""
    if d < 0:
        raise SeriesError("differencing order must be >= 0")
    if d >= len(series):
        raise SeriesError(
            f"cannot difference series {series.name!r} of length {len(series)} "
            f"{d} times"
        )
    out = series
    for _ in range(d):
        vals = tuple(b - a for a, b in zip(out.values, out.values[1:]))
        out = WeeklySeries(out.name, out.start.shift(1), vals)
    return out


def log_transform(series: WeeklySeries) -> WeeklySeries:
    """Elementwise natural logarithm; missing markers propagate unchanged."""
    vals = []
    for i, v in enumerate(series.values):
        if is_missing(v):
            vals.append(MISSING)
        elif v <= 0:
            week = series.start.shift(i)
            raise SeriesError(
                f"log of non-positive value {v} in series {series.name!r} "
                f"at week {week}"
            )
        else:
            vals.append(math.log(v))
    return WeeklySeries(series.name, series.start, tuple(vals))
