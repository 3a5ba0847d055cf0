"""Correlation, lagged cross-correlation, OLS, and lag-based causality tests.

The causality test compares a restricted autoregression of the target
(intercept plus n own lags) against an unrestricted one adding n predictor
lags, via the usual F statistic on the residual sum of squares.  Weeks with
any missing value are dropped listwise before fitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .series import WeeklySeries, align, lag
from .special import f_sf

__all__ = [
    "LagCorrelogram",
    "OlsFit",
    "GrangerResult",
    "SignificanceCell",
    "EconometricsError",
    "InsufficientSampleError",
    "RankDeficiencyError",
    "pearson",
    "cross_correlogram",
    "ols",
    "granger_test",
    "significance_table",
    "stars",
]

#: Annotation thresholds for causality p-values, strongest first.
STAR_LEVELS = ((0.01, "‡"), (0.05, "†"), (0.1, "*"))


class EconometricsError(ValueError):
    """A statistical operation cannot run on this input."""


class InsufficientSampleError(EconometricsError):
    pass


class RankDeficiencyError(EconometricsError):
    pass


@dataclass(frozen=True)
class LagCorrelogram:
    x_name: str
    y_name: str
    lags: tuple[int, ...]
    gamma: tuple[float, ...]

    def at(self, k: int) -> float:
        return self.gamma[self.lags.index(k)]

    def peak_lag(self) -> int:
        """Lag with the largest absolute cross-correlation."""
        best = max(range(len(self.lags)), key=lambda i: abs(self.gamma[i]))
        return self.lags[best]


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    rss: float
    dof: int
    names: tuple[str, ...]


@dataclass(frozen=True)
class GrangerResult:
    predictor: str
    target: str
    lag_order: int
    f_stat: float
    p_value: float
    rss_restricted: float
    rss_unrestricted: float
    n_obs: int
    dropped: int


@dataclass(frozen=True)
class SignificanceCell:
    target: str
    predictor: str
    lag_order: int
    p_value: float | None
    stars: str
    error: str | None = None


def _paired_complete(x: WeeklySeries, y: WeeklySeries) -> tuple[np.ndarray, np.ndarray]:
    ax, ay = align([x, y])
    xv = np.asarray(ax.values)
    yv = np.asarray(ay.values)
    keep = ~(np.isnan(xv) | np.isnan(yv))
    return xv[keep], yv[keep]


def pearson(x: WeeklySeries, y: WeeklySeries) -> float:
    """Product-moment correlation of the aligned, complete pairs."""
    xv, yv = _paired_complete(x, y)
    if xv.size < 3:
        raise InsufficientSampleError(
            f"correlation of {x.name!r} and {y.name!r} needs >= 3 complete pairs"
        )
    if np.ptp(xv) == 0 or np.ptp(yv) == 0:
        raise EconometricsError(
            f"correlation undefined: {x.name!r} or {y.name!r} is constant"
        )
    xd = xv - xv.mean()
    yd = yv - yv.mean()
    return float(np.dot(xd, yd) / math.sqrt(np.dot(xd, xd) * np.dot(yd, yd)))


def cross_correlogram(
    x: WeeklySeries, y: WeeklySeries, max_lag: int = 7
) -> LagCorrelogram:
    """Cross-correlation gamma(k) of x shifted against y for k in [-K, K].

    gamma(k) correlates x at week t+k with y at week t.  Both series are
    centered on their whole-sample means; sums run over the overlap window
    at each lag.
    """
    xv, yv = _paired_complete(x, y)
    n = xv.size
    if n <= max_lag + 2:
        raise InsufficientSampleError(
            f"need more than {max_lag + 2} complete pairs for lag range +/-{max_lag}"
        )
    if np.ptp(xv) == 0 or np.ptp(yv) == 0:
        raise EconometricsError("cross-correlation undefined for constant series")
    xd = xv - xv.mean()
    yd = yv - yv.mean()
    lags = tuple(range(-max_lag, max_lag + 1))
    gammas = []
    for k in lags:
        if k >= 0:
            xs, ys = xd[k:], yd[: n - k]
        else:
            xs, ys = xd[: n + k], yd[-k:]
        denom = math.sqrt(np.dot(xs, xs) * np.dot(ys, ys))
        gammas.append(float(np.dot(xs, ys) / denom) if denom > 0 else 0.0)
    return LagCorrelogram(x.name, y.name, lags, tuple(gammas))


def ols(
    y: np.ndarray,
    X: np.ndarray,
    names: Sequence[str],
    intercept: bool = True,
) -> OlsFit:
    """Least squares of y on the columns of X, optionally with an intercept."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    cols = list(names)
    if intercept:
        X = np.column_stack([np.ones(len(y)), X])
        cols = ["intercept"] + cols
    n, k = X.shape
    if n <= k:
        raise InsufficientSampleError(
            f"{n} observations cannot support {k} parameters"
        )
    rank = np.linalg.matrix_rank(X)
    if rank < k:
        raise RankDeficiencyError(
            f"design matrix is rank deficient (rank {rank} < {k}); "
            f"regressors: {cols}"
        )
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return OlsFit(
        coefficients=beta,
        residuals=resid,
        rss=float(np.dot(resid, resid)),
        dof=n - k,
        names=tuple(cols),
    )


def ols_series(
    y: WeeklySeries, regressors: Sequence[WeeklySeries], intercept: bool = True
) -> OlsFit:
    """OLS over aligned weekly series, dropping missing weeks listwise."""
    aligned = align([y, *regressors])
    mat = np.array([s.values for s in aligned], dtype=float).T
    keep = ~np.isnan(mat).any(axis=1)
    mat = mat[keep]
    return ols(mat[:, 0], mat[:, 1:], [s.name for s in aligned[1:]], intercept)


def _lag_design(values: np.ndarray, n_lags: int) -> np.ndarray:
    """Columns of values lagged 1..n, aligned to values[n:]."""
    n = values.size
    return np.column_stack(
        [values[n_lags - i : n - i] for i in range(1, n_lags + 1)]
    )


def granger_test(
    target: WeeklySeries, predictor: WeeklySeries, n: int
) -> GrangerResult:
    """F-test of whether n predictor lags improve a target autoregression.

    Restricted model: intercept + n target lags.  Unrestricted adds n
    predictor lags.  F = ((RSS_r - RSS_u)/n) / (RSS_u/(T - 2n - 1)) with T
    the usable observation count; the p-value is the upper F tail.
    """
    if n < 1:
        raise EconometricsError("lag order must be >= 1")
    at, ap = align([target, predictor])
    yv = np.asarray(at.values)
    xv = np.asarray(ap.values)
    keep = ~(np.isnan(yv) | np.isnan(xv))
    dropped = int((~keep).sum())
    # Listwise deletion of missing weeks; the series stay index-aligned.
    yv, xv = yv[keep], xv[keep]
    if yv.size < 2 * n + 10:
        raise InsufficientSampleError(
            f"causality test at lag {n} needs >= {2 * n + 10} complete weeks, "
            f"got {yv.size}"
        )
    y = yv[n:]
    own = _lag_design(yv, n)
    cross = _lag_design(xv, n)
    lag_names = [f"{target.name}[-{i}]" for i in range(1, n + 1)]
    x_names = [f"{predictor.name}[-{i}]" for i in range(1, n + 1)]
    restricted = ols(y, own, lag_names)
    unrestricted = ols(y, np.column_stack([own, cross]), lag_names + x_names)
    t_obs = y.size
    dfd = t_obs - 2 * n - 1
    rss_r, rss_u = restricted.rss, unrestricted.rss
    if rss_u <= 0:
        f_stat = math.inf
        p_value = 0.0
    else:
        f_stat = max(0.0, ((rss_r - rss_u) / n) / (rss_u / dfd))
        p_value = f_sf(f_stat, n, dfd)
    return GrangerResult(
        predictor=predictor.name,
        target=target.name,
        lag_order=n,
        f_stat=f_stat,
        p_value=p_value,
        rss_restricted=rss_r,
        rss_unrestricted=rss_u,
        n_obs=t_obs,
        dropped=dropped,
    )


def stars(p_value: float) -> str:
    """Annotation for a p-value at the 0.01 / 0.05 / 0.1 thresholds."""
    for threshold, symbol in STAR_LEVELS:
        if p_value < threshold:
            return symbol
    return ""


def significance_table(
    targets: Mapping[str, WeeklySeries],
    predictors: Mapping[str, WeeklySeries],
    lags: Sequence[int] = (1, 2, 3, 4),
) -> list[SignificanceCell]:
    """Full target x predictor x lag grid of causality results.

    Per-cell failures (insufficient sample, collinearity) are recorded in
    the cell rather than aborting the grid.
    """
    if not lags:
        raise EconometricsError("lag list must be non-empty")
    cells = []
    for t_name, t_series in targets.items():
        for p_name, p_series in predictors.items():
            for k in lags:
                try:
                    res = granger_test(t_series, p_series, k)
                    cells.append(
                        SignificanceCell(
                            t_name, p_name, k, res.p_value, stars(res.p_value)
                        )
                    )
                except EconometricsError as exc:
                    cells.append(
                        SignificanceCell(t_name, p_name, k, None, "", str(exc))
                    )
    return cells
