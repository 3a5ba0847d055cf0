"""Synthetic desk-scale dataset generator.

Builds a fully seeded stand-in for the real tweet/market/search corpus: a
latent AR(1) mood series drives tweet sentiment, next week's return carries
a planted dependence on that latent series, and the search-volume terms
load on two independent latent blocks.  Every byte of output is determined
by the seed, so golden and determinism tests can rely on it.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingestion import OhlcvWeekly, SviMatrix, TweetRecord
from .series import WeekStamp, WeeklySeries

__all__ = ["FixtureSecurity", "generate_security", "make_fixture"]

#: First Friday of the synthetic sample.
FIXTURE_START = dt.date(2024, 1, 5)

#: AR(1) persistence of the latent mood series.
LATENT_PHI = 0.75

#: Coefficient of next week's return on the current latent value.
PLANTED_BETA = 2.0

#: Mean weekly return (percent).  Keeps actual returns clear of zero so
#: percentage-error metrics on the synthetic sample stay well defined.
RETURN_DRIFT = 8.0

_POS_WORDS = (
    "rally", "surge", "gains", "bullish", "strong", "upside",
    "breakout", "momentum", "soaring", "optimism",
)
_NEG_WORDS = (
    "selloff", "slump", "drop", "bearish", "weak", "downside",
    "losses", "fear", "tumbling", "panic",
)
_FILLER = ("the", "market", "looks", "today", "week", "price")


@dataclass(frozen=True)
class FixtureSecurity:
    """In-memory synthetic dataset for one security, plus its ground truth."""

    label: str
    tweets: tuple[TweetRecord, ...]
    bars: tuple[OhlcvWeekly, ...]
    svi: SviMatrix
    vix: WeeklySeries
    latent: np.ndarray          # the mood series driving everything
    returns: np.ndarray         # percent log returns, one per bar after the first

    @property
    def weeks(self) -> tuple[WeekStamp, ...]:
        return tuple(b.week for b in self.bars)


def _sentiment_counts(rng, latent_t: float, base: int, spread: int):
    total = base + int(rng.poisson(spread))
    prob = 1.0 / (1.0 + math.exp(-0.9 * latent_t))
    pos = int(rng.binomial(total, prob))
    return pos, total - pos


def _tweet_text(rng, positive: bool) -> str:
    pool = _POS_WORDS if positive else _NEG_WORDS
    words = [pool[int(rng.integers(len(pool)))] for _ in range(3)]
    words.append(_FILLER[int(rng.integers(len(_FILLER)))])
    return " ".join(words)


def _week_tweets(
    rng, label: str, week: WeekStamp, index: int, latent_t: float
) -> list[TweetRecord]:
    records = []
    for window, (base, spread, day_back, hour) in {
        "wd": (70, 10, 2, 15),      # Wednesday afternoon
        "wk": (25, 5, 6, 15),       # preceding Saturday afternoon
    }.items():
        pos, neg = _sentiment_counts(rng, latent_t, base, spread)
        stamp = dt.datetime.combine(
            week.week_end - dt.timedelta(days=day_back),
            dt.time(hour), tzinfo=dt.timezone.utc,
        )
        for i in range(pos + neg):
            positive = i < pos
            records.append(
                TweetRecord(
                    id=f"{label}-{index}-{window}-{i}",
                    timestamp=stamp + dt.timedelta(seconds=i),
                    text=_tweet_text(rng, positive),
                    label="positive" if positive else "negative",
                )
            )
    return records


def generate_security(
    seed: int,
    label: str,
    n_weeks: int = 66,
    predictive: bool = True,
) -> FixtureSecurity:
    """Generate one security's synthetic corpus.

    *n_weeks* counts return observations; one extra leading bar anchors the
    first return.  With *predictive* off, returns are driven by an
    independent latent series instead, severing the planted link while
    keeping every marginal distribution identical.
    """
    rng = np.random.default_rng([seed, label_digest(label)])
    n_bars = n_weeks + 1
    start = WeekStamp(FIXTURE_START)
    weeks = tuple(start.shift(i) for i in range(n_bars))

    latent = _ar1_path(rng, n_bars, LATENT_PHI)
    shadow = _ar1_path(rng, n_bars, LATENT_PHI)   # drives SVI block 2
    driver = latent if predictive else _ar1_path(rng, n_bars, LATENT_PHI)

    returns = (
        RETURN_DRIFT + PLANTED_BETA * driver[:-1]
        + 0.6 * rng.normal(size=n_weeks)
    )

    closes = np.empty(n_bars)
    closes[0] = 100.0
    closes[1:] = 100.0 * np.exp(np.cumsum(returns) / 100.0)
    bars = []
    for t in range(n_bars):
        c = closes[t]
        o = closes[t - 1] if t else c * math.exp(rng.normal(0.0, 0.005))
        spread_hi = abs(rng.normal(0.0, 0.01))
        spread_lo = abs(rng.normal(0.0, 0.01))
        hi = max(o, c) * math.exp(spread_hi)
        lo = min(o, c) * math.exp(-spread_lo)
        vol = float(np.round(1e6 * math.exp(rng.normal(0.0, 0.3)), 0))
        bars.append(OhlcvWeekly(weeks[t], round(o, 4), round(hi, 4),
                                round(lo, 4), round(c, 4), vol))

    tweets: list[TweetRecord] = []
    for t, week in enumerate(weeks):
        tweets.extend(_week_tweets(rng, label, week, t, latent[t]))

    terms = tuple(
        [f"{label.lower()} term{j}a" for j in range(1, 5)]
        + [f"{label.lower()} term{j}b" for j in range(1, 5)]
    )
    rows = []
    for t in range(n_bars):
        row = []
        for j in range(8):
            factor = latent[t] if j < 4 else shadow[t]
            raw = 50.0 + 12.0 * (0.9 * factor + 0.3 * rng.normal())
            row.append(round(max(raw, 0.0), 4))
        rows.append(tuple(row))
    svi = SviMatrix(weeks=weeks, terms=terms, volumes=tuple(rows))

    vix_latent = _ar1_path(rng, n_bars, 0.8)
    vix = WeeklySeries(
        "vix", start, tuple(round(20.0 + 3.0 * v, 4) for v in vix_latent)
    )
    return FixtureSecurity(
        label=label,
        tweets=tuple(tweets),
        bars=tuple(bars),
        svi=svi,
        vix=vix,
        latent=latent,
        returns=returns,
    )


def _ar1_path(rng, n: int, phi: float) -> np.ndarray:
    """Stationary AR(1) path scaled to unit marginal variance."""
    innov_sd = math.sqrt(1.0 - phi * phi)
    path = np.empty(n)
    path[0] = rng.normal()
    for t in range(1, n):
        path[t] = phi * path[t - 1] + innov_sd * rng.normal()
    return path


def label_digest(label: str) -> int:
    """Stable small integer digest of a label (process-independent)."""
    h = 0
    for ch in label:
        h = (h * 131 + ord(ch)) % (2 ** 31)
    return h


# ---------------------------------------------------------------------------
# File materialization


def _write_tweets(path: Path, sec: FixtureSecurity) -> None:
    lines = ["id,timestamp,text,label"]
    for tw in sec.tweets:
        lines.append(
            f"{tw.id},{tw.timestamp.strftime('%Y-%m-%dT%H:%M:%S+00:00')},"
            f"{tw.text},{tw.label}"
        )
    path.write_text("\n".join(lines) + "\n")


def _write_ohlcv(path: Path, sec: FixtureSecurity) -> None:
    lines = ["date,open,high,low,close,volume"]
    for b in sec.bars:
        lines.append(
            f"{b.week.week_end.isoformat()},{b.open:.4f},{b.high:.4f},"
            f"{b.low:.4f},{b.close:.4f},{b.volume:.0f}"
        )
    path.write_text("\n".join(lines) + "\n")


def _write_svi(path: Path, sec: FixtureSecurity) -> None:
    lines = ["date," + ",".join(sec.svi.terms)]
    for week, row in zip(sec.svi.weeks, sec.svi.volumes):
        lines.append(
            week.week_end.isoformat() + "," + ",".join(f"{v:.4f}" for v in row)
        )
    path.write_text("\n".join(lines) + "\n")


def _write_vix(path: Path, vix: WeeklySeries) -> None:
    lines = ["date,value"]
    for week, value in zip(vix.weeks, vix.values):
        lines.append(f"{week.week_end.isoformat()},{value:.4f}")
    path.write_text("\n".join(lines) + "\n")


def make_fixture(seed: int, outdir: str | Path, n_weeks: int = 66) -> Path:
    """Write the two-security synthetic dataset and its run configuration.

    Returns the path of the written config file.  Output is byte-identical
    across runs with the same seed.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    securities = []
    for label in ("ALPHA", "BETA"):
        sec = generate_security(seed, label, n_weeks=n_weeks)
        low = label.lower()
        _write_tweets(out / f"{low}_tweets.csv", sec)
        _write_ohlcv(out / f"{low}_ohlcv.csv", sec)
        _write_svi(out / f"{low}_svi.csv", sec)
        _write_vix(out / f"{low}_vix.csv", sec.vix)
        securities.append(
            {
                "label": label,
                "tweets": f"{low}_tweets.csv",
                "ohlcv": f"{low}_ohlcv.csv",
                "svi": f"{low}_svi.csv",
                "vix": f"{low}_vix.csv",
            }
        )
    config = {
        "seed": seed,
        "split": 0.76,
        "lags": [1, 2, 3, 4],
        "max_lag": 7,
        "log_vix": True,
        "securities": securities,
    }
    config_path = out / "config.json"
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    return config_path
