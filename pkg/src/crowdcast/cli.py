"""Command-line pipeline driver.

A declarative JSON config names the input files per security; subcommands
run individual stages or the whole pipeline and write plain-text artifacts
plus a hash manifest.  All randomness flows from the single config seed, so
reruns are byte-identical.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import econometrics, factors, features, fixtures, forecasting, reports
from .ingestion import IngestionError, parse_ohlcv, parse_svi, parse_tweets, \
    parse_weekly_values, window_tweets
from .sentiment import SentimentError, label_tweets, train
from .series import SeriesError, log_transform

__all__ = [
    "RunConfig",
    "SecurityConfig",
    "ConfigError",
    "load_config",
    "run_pipeline",
    "main",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_DATA",
    "EXIT_NUMERIC",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

ALL_KINDS = frozenset(
    {"features", "factors", "heatmap", "correlogram", "granger", "forecast"}
)

_DATA_ERRORS = (IngestionError, SentimentError, SeriesError)


class ConfigError(ValueError):
    """Run configuration is missing, malformed, or references absent files."""


@dataclass(frozen=True)
class SecurityConfig:
    label: str
    tweets: Path
    ohlcv: Path
    svi: Path
    vix: Path
    price: Path | None = None


@dataclass(frozen=True)
class RunConfig:
    securities: tuple[SecurityConfig, ...]
    split: float = 0.76
    lags: tuple[int, ...] = (1, 2, 3, 4)
    max_lag: int = 7
    log_vix: bool = True
    seed: int = 0
    out: Path = Path("artifacts")
    parallel: int = 1

    def __post_init__(self) -> None:
        if not self.securities:
            raise ConfigError("config lists no securities")
        if not (0.0 < self.split < 1.0):
            raise ConfigError(f"split {self.split} outside (0, 1)")
        if not self.lags or any(k < 1 for k in self.lags):
            raise ConfigError("lag list must be non-empty positive integers")
        if self.max_lag < 1:
            raise ConfigError("max_lag must be >= 1")
        if self.parallel < 1:
            raise ConfigError("parallel must be >= 1")


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a JSON run configuration.

    Relative file paths resolve against the config file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    base = path.parent
    securities = []
    for i, entry in enumerate(doc.get("securities", [])):
        if not isinstance(entry, dict) or "label" not in entry:
            raise ConfigError(f"security entry {i} needs a label")
        files = {}
        for key in ("tweets", "ohlcv", "svi", "vix"):
            if key not in entry:
                raise ConfigError(
                    f"security {entry['label']!r} missing {key!r} file"
                )
            files[key] = base / entry[key]
        price = base / entry["price"] if "price" in entry else None
        for key, f in list(files.items()) + ([("price", price)] if price else []):
            if not f.is_file():
                raise ConfigError(
                    f"security {entry['label']!r}: {key} file not found: {f}"
                )
        securities.append(SecurityConfig(entry["label"], **files, price=price))
    try:
        return RunConfig(
            securities=tuple(securities),
            split=float(doc.get("split", 0.76)),
            lags=tuple(int(k) for k in doc.get("lags", (1, 2, 3, 4))),
            max_lag=int(doc.get("max_lag", 7)),
            log_vix=bool(doc.get("log_vix", True)),
            seed=int(doc.get("seed", 0)),
            out=base / doc["out"] if "out" in doc else Path("artifacts"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config value: {exc}") from None


def security_seed(base_seed: int, label: str) -> int:
    """Per-security seed derived stably from the run seed and the label."""
    digest = hashlib.sha256(f"{base_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def _load_inputs(cfg: SecurityConfig, run: RunConfig):
    with open(cfg.tweets) as fh:
        tweets = parse_tweets(fh).records
    labeled = [t for t in tweets if t.label is not None]
    unlabeled = [t for t in tweets if t.label is None]
    if unlabeled:
        if not labeled:
            raise SentimentError(
                f"{cfg.label}: corpus entirely unlabeled; cannot train classifier"
            )
        model = train(labeled)
        tweets = label_tweets(tweets, model)
    with open(cfg.ohlcv) as fh:
        bars = parse_ohlcv(fh).bars
    if not bars:
        raise IngestionError(f"{cfg.label}: OHLCV file contains no valid bars")
    with open(cfg.svi) as fh:
        svi = parse_svi(fh)
    with open(cfg.vix) as fh:
        vix = parse_weekly_values(fh, "vix")
    if run.log_vix:
        vix = log_transform(vix)
    price = None
    if cfg.price is not None:
        with open(cfg.price) as fh:
            price = parse_weekly_values(fh, "close")
    return tweets, bars, svi, vix, price


def analyze_security(
    cfg: SecurityConfig, run: RunConfig, kinds: frozenset = ALL_KINDS
) -> dict[str, str]:
    """Compute the requested artifact contents for one security.

    Returns a mapping of artifact-relative path to file content; nothing is
    written here, so a failure produces no partial files.
    """
    tweets, bars, svi, vix, price = _load_inputs(cfg, run)
    windowed = window_tweets(tweets, start=bars[0].week, end=bars[-1].week)
    tallies = features.count_buckets(windowed.buckets)
    tw, fin = features.build_feature_sets(cfg.label, tallies, bars, vix, price)

    factor_model = factors.fit_factors(svi)
    scores = factor_model.scores

    artifacts: dict[str, str] = {}
    prefix = cfg.label

    if "features" in kinds:
        artifacts[f"{prefix}/features.csv"] = reports.features_csv(tw, fin, scores)
    if "factors" in kinds:
        artifacts[f"{prefix}/factor_loadings.csv"] = reports.loadings_csv(factor_model)

    targets = {
        "returns": fin.returns,
        "volatility": fin.volatility,
        "vix": fin.vix,
    }
    predictors = {
        "bullishness_wd": tw.bullishness_wd,
        "agreement_wd": tw.agreement_wd,
        "msg_volume_wd": tw.msg_volume_wd,
        "bullishness_wk": tw.bullishness_wk,
        **{s.name: s for s in scores},
    }

    if "heatmap" in kinds:
        all_series = {**tw.as_dict(), **fin.as_dict(),
                      **{s.name: s for s in scores}}
        artifacts[f"{prefix}/correlation_heatmap.csv"] = reports.heatmap_csv(all_series)
    if "correlogram" in kinds:
        correlograms = []
        for p_name in ("bullishness_wd", "msg_volume_wd",
                       *(s.name for s in scores)):
            p_series = predictors[p_name]
            for t_series in targets.values():
                correlograms.append(
                    econometrics.cross_correlogram(
                        p_series, t_series, max_lag=run.max_lag
                    )
                )
        artifacts[f"{prefix}/cross_correlogram.csv"] = reports.correlogram_csv(
            correlograms
        )
    if "granger" in kinds:
        cells = econometrics.significance_table(targets, predictors, run.lags)
        artifacts[f"{prefix}/granger.csv"] = reports.granger_csv(cfg.label, cells)
    if "forecast" in kinds:
        forecast_predictors = [
            tw.bullishness_wd, tw.msg_volume_wd, *scores
        ]
        report = forecasting.compare_with_without(
            cfg.label,
            fin.returns,
            forecast_predictors,
            split=run.split,
            seed=security_seed(run.seed, cfg.label),
        )
        artifacts[f"{prefix}/forecast.json"] = reports.forecast_json(report)
        artifacts[f"{prefix}/forecast.csv"] = reports.forecast_csv(report)
    return artifacts


def _error_code(exc: Exception) -> int:
    if isinstance(exc, _DATA_ERRORS):
        return EXIT_DATA
    return EXIT_NUMERIC


def run_pipeline(run: RunConfig, kinds: frozenset = ALL_KINDS) -> int:
    """Process every security and write artifacts plus the hash manifest.

    Securities are computed independently (optionally in parallel); each
    security's artifacts are written only after its computation fully
    succeeds.  The manifest is always written last and records whether the
    run completed.
    """
    out = run.out
    out.mkdir(parents=True, exist_ok=True)

    results: dict[str, dict[str, str]] = {}
    errors: dict[str, str] = {}
    codes: list[int] = []

    def work(cfg: SecurityConfig):
        return cfg.label, analyze_security(cfg, run, kinds)

    if run.parallel > 1 and len(run.securities) > 1:
        with ThreadPoolExecutor(max_workers=run.parallel) as pool:
            futures = {pool.submit(work, cfg): cfg for cfg in run.securities}
            for fut, cfg in futures.items():
                try:
                    label, artifacts = fut.result()
                    results[label] = artifacts
                except Exception as exc:
                    errors[cfg.label] = f"{type(exc).__name__}: {exc}"
                    codes.append(_error_code(exc))
    else:
        for cfg in run.securities:
            try:
                label, artifacts = work(cfg)
                results[label] = artifacts
            except Exception as exc:
                errors[cfg.label] = f"{type(exc).__name__}: {exc}"
                codes.append(_error_code(exc))

    hashes: dict[str, str] = {}
    for cfg in run.securities:          # deterministic write order
        artifacts = results.get(cfg.label)
        if artifacts is None:
            continue
        for rel, content in sorted(artifacts.items()):
            dest = out / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            data = content.encode()
            dest.write_bytes(data)
            hashes[rel] = hashlib.sha256(data).hexdigest()

    manifest = {
        "seed": run.seed,
        "complete": not errors,
        "artifacts": hashes,
        "errors": dict(sorted(errors.items())),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return codes[0] if codes else EXIT_OK


def _cmd_ingest(run: RunConfig) -> int:
    for cfg in run.securities:
        tweets, bars, svi, vix, _ = _load_inputs(cfg, run)
        print(
            f"{cfg.label}: {len(tweets)} tweets, {len(bars)} bars, "
            f"{len(svi.weeks)} search-volume weeks x {len(svi.terms)} terms, "
            f"{len(vix)} vix weeks"
        )
    return EXIT_OK


_SUBCOMMAND_KINDS = {
    "features": frozenset({"features"}),
    "factors": frozenset({"factors"}),
    "correlate": frozenset({"heatmap", "correlogram"}),
    "granger": frozenset({"granger"}),
    "forecast": frozenset({"forecast"}),
    "run": ALL_KINDS,
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to JSON run configuration")
    common.add_argument("--seed", type=int, help="override config seed")
    common.add_argument("--out", help="override output directory")
    common.add_argument("--parallel", type=int, help="worker count (default 1)")

    parser = argparse.ArgumentParser(
        prog="crowdcast",
        description="Market analytics from crowd sentiment and search volume.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("ingest", "parse inputs and print corpus summaries"),
        ("features", "write weekly feature tables"),
        ("factors", "write search-volume factor loadings"),
        ("correlate", "write correlation heatmap and cross-correlograms"),
        ("granger", "write lag-causality significance tables"),
        ("forecast", "write with/without-predictor forecast reports"),
        ("run", "full pipeline: all artifacts plus manifest"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)
    fx = sub.add_parser("fixture", parents=[common],
                        help="generate the synthetic two-security dataset")
    fx.add_argument("--weeks", type=int, default=66,
                    help="sample length in return weeks")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "fixture":
        seed = args.seed if args.seed is not None else 0
        out = Path(args.out) if args.out else Path("fixture")
        try:
            config_path = fixtures.make_fixture(seed, out, n_weeks=args.weeks)
        except OSError as exc:
            print(f"error: cannot write fixture: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"fixture written; config at {config_path}")
        return EXIT_OK

    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out:
            overrides["out"] = Path(args.out)
        if args.parallel is not None:
            overrides["parallel"] = args.parallel
        if overrides:
            run = replace(run, **overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "ingest":
            return _cmd_ingest(run)
        code = run_pipeline(run, _SUBCOMMAND_KINDS[args.command])
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if code != EXIT_OK:
        print("pipeline finished with errors; see manifest.json", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
