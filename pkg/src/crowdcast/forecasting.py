"""Model mining and one-step forecast evaluation.

Fits ARIMA(p,d,q)(P,D,Q) candidates by conditional sum of squares (CSS,
pre-sample errors zero) and exponential-smoothing variants by one-step
in-sample squared error.  Exogenous predictors enter as a linear regression
whose error term follows the ARIMA process, estimated jointly.  Candidates
are mined over an order grid, ranked on the training window, and evaluated
out of sample by one-step-ahead MAPE and direction accuracy with parameters
frozen at their training values.

Stationarity and invertibility are enforced by parameterizing the AR and MA
coefficients through partial autocorrelations squashed into (-1, 1), a
bijection onto the stable region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .series import WeeklySeries, align, lag
from .special import t_sf

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

__all__ = [
    "ArimaSpec",
    "SearchSpace",
    "FittedArima",
    "FittedEs",
    "ForecastBlock",
    "ForecastReport",
    "FittingError",
    "MiningError",
    "fit_arima",
    "fit_es",
    "stationary_r2",
    "stepwise_select",
    "mine_models",
    "rolling_forecast",
    "compare_with_without",
    "mape",
    "direction_accuracy",
]

_PACF_SCALE = 0.999
_ROOT_MARGIN = 1.0 + 1e-6
_CSS_MAXITER = 500
_N_STARTS = 5


class FittingError(ValueError):
    """A model cannot be estimated on this sample."""


class MiningError(FittingError):
    """Every candidate in the search space failed to fit."""


@dataclass(frozen=True)
class ArimaSpec:
    """Order specification for an ARIMA(p,d,q)(P,D,Q,period) candidate."""

    p: int
    d: int
    q: int
    seasonal: tuple[int, int, int, int] | None = None
    include_intercept: bool = True

    def __post_init__(self) -> None:
        if min(self.p, self.d, self.q) < 0:
            raise FittingError("ARIMA orders must be non-negative")
        sp = sq = 0
        if self.seasonal is not None:
            P, D, Q, period = self.seasonal
            if min(P, D, Q) < 0 or period < 2:
                raise FittingError("seasonal orders invalid (period must be >= 2)")
            sp, sq = P, Q
        if self.p + self.q + sp + sq == 0 and self.d == 0 and not self.include_intercept:
            raise FittingError("degenerate spec: no parameters and no differencing")

    @property
    def label(self) -> str:
        base = f"ARIMA({self.p},{self.d},{self.q})"
        if self.seasonal is not None:
            P, D, Q, s = self.seasonal
            base += f"({P},{D},{Q})[{s}]"
        return base


@dataclass(frozen=True)
class SearchSpace:
    """Order grid for model mining."""

    p_max: int = 3
    q_max: int = 3
    d_max: int = 2
    include_es: bool = True
    # Seasonal orders are off by default: weekly samples of the size this
    # toolkit targets cannot support year-length seasonality.
    seasonal: tuple[int, int, int, int] | None = None

    def arima_specs(self) -> list[ArimaSpec]:
        specs = []
        for d in range(self.d_max + 1):
            for p in range(self.p_max + 1):
                for q in range(self.q_max + 1):
                    specs.append(ArimaSpec(p, d, q, seasonal=self.seasonal))
        return specs


@dataclass(frozen=True)
class FittedArima:
    spec: ArimaSpec
    intercept: float
    ar: np.ndarray
    ma: np.ndarray
    seasonal_ar: np.ndarray
    seasonal_ma: np.ndarray
    gamma: np.ndarray
    exog_names: tuple[str, ...]
    sigma2: float
    css: float
    converged: bool
    residuals: np.ndarray       # one-step in-sample, differenced scale
    n_params: int
    gamma_p_values: tuple[float, ...] = ()

    @property
    def diff_order(self) -> int:
        return self.spec.d

    @property
    def seasonal_diff(self) -> tuple[int, int]:
        if self.spec.seasonal is None:
            return (0, 1)
        return (self.spec.seasonal[1], self.spec.seasonal[3])

    @property
    def label(self) -> str:
        return self.spec.label


@dataclass(frozen=True)
class FittedEs:
    variant: str                # simple | holt-additive | damped
    alpha: float
    beta: float
    phi: float
    sse: float
    converged: bool
    residuals: np.ndarray
    n_params: int

    @property
    def diff_order(self) -> int:
        return 0 if self.variant == "simple" else 1

    @property
    def seasonal_diff(self) -> tuple[int, int]:
        return (0, 1)

    @property
    def label(self) -> str:
        return f"ES({self.variant})"


@dataclass(frozen=True)
class ForecastBlock:
    model_label: str
    predictors: tuple[str, ...]
    mape: float
    direction_accuracy: float
    stationary_r2: float
    weeks: tuple
    actuals: tuple[float, ...]
    forecasts: tuple[float, ...]


@dataclass(frozen=True)
class ForecastReport:
    security: str
    target: str
    with_predictors: ForecastBlock
    without_predictors: ForecastBlock


# ---------------------------------------------------------------------------
# CSS machinery


def _arma_resid_py(e: np.ndarray, ar: np.ndarray, ma: np.ndarray) -> np.ndarray:
    n = e.shape[0]
    p = ar.shape[0]
    q = ma.shape[0]
    eps = np.zeros(n)
    for t in range(p, n):
        acc = e[t]
        for i in range(p):
            acc -= ar[i] * e[t - 1 - i]
        for j in range(q):
            idx = t - 1 - j
            if idx >= 0:
                acc -= ma[j] * eps[idx]
        eps[t] = acc
    return eps


if _HAVE_NUMBA:
    _arma_resid = njit(cache=True)(_arma_resid_py)
else:  # pragma: no cover
    _arma_resid = _arma_resid_py


def _raw_to_stable(raw: np.ndarray) -> np.ndarray:
    """Map unconstrained reals to a stationary AR coefficient vector.

    Squashed values act as partial autocorrelations fed through the
    Durbin-Levinson recursion, which is a bijection onto the stable region.
    """
    pacf = _PACF_SCALE * np.tanh(raw)
    coefs = np.zeros(0)
    for r in pacf:
        prev = coefs
        coefs = np.empty(prev.size + 1)
        coefs[-1] = r
        if prev.size:
            coefs[:-1] = prev - r * prev[::-1]
    return coefs


def _stable_to_raw(coefs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`_raw_to_stable` (reverse Durbin-Levinson)."""
    work = np.asarray(coefs, dtype=float).copy()
    pacf = np.zeros(work.size)
    for k in range(work.size - 1, -1, -1):
        r = work[k]
        pacf[k] = r
        if k and abs(1.0 - r * r) > 1e-12:
            prev = (work[:k] + r * work[:k][::-1]) / (1.0 - r * r)
            work = np.append(prev, 0.0)
    z = np.clip(pacf / _PACF_SCALE, -0.9999, 0.9999)
    return np.arctanh(z)


def _expand_poly(coefs: np.ndarray, stride: int) -> np.ndarray:
    """Lag polynomial 1 - sum c_i L^(i*stride), ascending powers."""
    out = np.zeros(coefs.size * stride + 1)
    out[0] = 1.0
    for i, c in enumerate(coefs, start=1):
        out[i * stride] = -c
    return out


def _combine(ar: np.ndarray, sar: np.ndarray, period: int) -> np.ndarray:
    """Full AR-side coefficients a_k with poly 1 - sum a_k L^k."""
    if sar.size == 0:
        return ar
    full = np.convolve(_expand_poly(ar, 1), _expand_poly(sar, period))
    return -full[1:]


def _combine_ma(ma: np.ndarray, sma: np.ndarray, period: int) -> np.ndarray:
    """Full MA-side coefficients b_k with poly 1 + sum b_k L^k."""
    if sma.size == 0:
        return ma
    # Reuse the AR expansion on negated coefficients: 1 + t L = 1 - (-t) L.
    full = np.convolve(_expand_poly(-ma, 1), _expand_poly(-sma, period))
    return full[1:]


def _apply_diff(values: np.ndarray, d: int, seasonal_d: int, period: int) -> np.ndarray:
    out = values
    for _ in range(seasonal_d):
        out = out[period:] - out[:-period]
    for _ in range(d):
        out = out[1:] - out[:-1]
    return out


def _poly_roots_outside(coefs: np.ndarray, margin: float = _ROOT_MARGIN) -> bool:
    """True when all roots of 1 - sum c_i z^i lie outside the unit circle."""
    if coefs.size == 0 or not np.any(coefs):
        return True
    poly = np.concatenate([[-c for c in coefs[::-1]], [1.0]])
    roots = np.roots(poly)
    return bool(np.all(np.abs(roots) > margin))


def ar_stationary(ar: np.ndarray) -> bool:
    return _poly_roots_outside(np.asarray(ar, dtype=float))


def _near_unit_root(coefs: np.ndarray, margin: float = 1.01) -> bool:
    """True when the lag polynomial 1 - sum c_i L^i has a root near the circle.

    Optima pinned against the stability boundary signal a misspecified
    candidate whose in-sample CSS is not trustworthy.
    """
    return not _poly_roots_outside(coefs, margin)


def ma_invertible(ma: np.ndarray) -> bool:
    return _poly_roots_outside(-np.asarray(ma, dtype=float))


@dataclass
class _Design:
    """Differenced target and exogenous matrix ready for the CSS objective."""

    w: np.ndarray
    xw: np.ndarray              # shape (len(w), k)
    spec: ArimaSpec
    period: int
    seasonal_p: int
    seasonal_q: int


def _make_design(
    y: np.ndarray, X: np.ndarray | None, spec: ArimaSpec
) -> _Design:
    if spec.seasonal is not None:
        P, D, Q, period = spec.seasonal
    else:
        P, D, Q, period = 0, 0, 0, 1
    w = _apply_diff(y, spec.d, D, period)
    if X is not None and X.size:
        xw = np.column_stack(
            [_apply_diff(X[:, j], spec.d, D, period) for j in range(X.shape[1])]
        )
    else:
        xw = np.zeros((w.size, 0))
    return _Design(w, xw, spec, period, P, Q)


def _unpack(params: np.ndarray, design: _Design):
    spec = design.spec
    k = design.xw.shape[1]
    pos = 0
    c = 0.0
    if spec.include_intercept:
        c = params[0]
        pos = 1
    gamma = params[pos : pos + k]
    pos += k
    ar = _raw_to_stable(params[pos : pos + spec.p])
    pos += spec.p
    ma = -_raw_to_stable(params[pos : pos + spec.q])
    pos += spec.q
    sar = _raw_to_stable(params[pos : pos + design.seasonal_p])
    pos += design.seasonal_p
    sma = -_raw_to_stable(params[pos : pos + design.seasonal_q])
    full_ar = _combine(ar, sar, design.period)
    full_ma = _combine_ma(ma, sma, design.period)
    return c, gamma, ar, ma, sar, sma, full_ar, full_ma


def _css_value(params: np.ndarray, design: _Design) -> float:
    c, gamma, _, _, _, _, full_ar, full_ma = _unpack(params, design)
    e = design.w - c
    if gamma.size:
        e = e - design.xw @ gamma
    eps = _arma_resid(e, full_ar, full_ma)
    p_eff = full_ar.size
    if p_eff >= e.size:
        return math.inf
    return float(np.dot(eps[p_eff:], eps[p_eff:]))


def _n_model_params(spec: ArimaSpec, k_exog: int) -> int:
    sp = sq = 0
    if spec.seasonal is not None:
        sp, _, sq, _ = spec.seasonal
    return int(spec.include_intercept) + k_exog + spec.p + spec.q + sp + sq


def _initial_params(design: _Design) -> np.ndarray:
    """Heuristic start: OLS drift and exogenous slopes, zero ARMA raws."""
    spec = design.spec
    k = design.xw.shape[1]
    params = np.zeros(_n_model_params(spec, k))
    pos = 0
    w = design.w
    if spec.include_intercept:
        params[0] = w.mean()
        pos = 1
    if k:
        X = np.column_stack([np.ones(w.size), design.xw])
        beta, *_ = np.linalg.lstsq(X, w, rcond=None)
        if spec.include_intercept:
            params[0] = beta[0]
        params[pos : pos + k] = beta[1:]
    return params


def _gamma_p_values(
    params: np.ndarray, design: _Design, css: float, n_used: int
) -> tuple[float, ...]:
    """Asymptotic t-test p-values for each exogenous coefficient.

    Covariance is sigma^2 times the inverse Hessian of half the CSS,
    evaluated numerically at the optimum.
    """
    k = design.xw.shape[1]
    if k == 0:
        return ()
    n_par = params.size
    dof = n_used - n_par
    if dof <= 0 or css <= 0:
        return tuple(1.0 for _ in range(k))
    sigma2 = css / n_used
    h = np.zeros((n_par, n_par))
    steps = 1e-4 * (1.0 + np.abs(params))
    f0 = 0.5 * css

    def f(vec):
        return 0.5 * _css_value(vec, design)

    for i in range(n_par):
        for j in range(i, n_par):
            si, sj = steps[i], steps[j]
            if i == j:
                up = params.copy(); up[i] += si
                dn = params.copy(); dn[i] -= si
                h[i, i] = (f(up) - 2.0 * f0 + f(dn)) / (si * si)
            else:
                pp = params.copy(); pp[i] += si; pp[j] += sj
                pm = params.copy(); pm[i] += si; pm[j] -= sj
                mp = params.copy(); mp[i] -= si; mp[j] += sj
                mm = params.copy(); mm[i] -= si; mm[j] -= sj
                h[i, j] = h[j, i] = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * si * sj)
    try:
        cov = sigma2 * np.linalg.pinv(h)
    except np.linalg.LinAlgError:
        cov = None
    g_start = 1 if design.spec.include_intercept else 0
    out = []
    for j in range(k):
        idx = g_start + j
        var = cov[idx, idx] if cov is not None else -1.0
        if var <= 0:
            # Indefinite Hessian at a sloppy optimum: fall back to the
            # marginal curvature of this coefficient alone.
            var = sigma2 / h[idx, idx] if h[idx, idx] > 0 else -1.0
        if var <= 0:
            out.append(1.0)
            continue
        t = params[idx] / math.sqrt(var)
        out.append(t_sf(t, dof))
    return tuple(out)


def _fit_arima_arrays(
    y: np.ndarray,
    spec: ArimaSpec,
    X: np.ndarray | None,
    exog_names: tuple[str, ...],
    seed: int = 0,
    starts: int = _N_STARTS,
    compute_p_values: bool = False,
) -> FittedArima:
    design = _make_design(y, X, spec)
    k = design.xw.shape[1]
    n_par = _n_model_params(spec, k)
    if design.w.size <= n_par + 5:
        raise FittingError(
            f"{spec.label}: {design.w.size} differenced observations cannot "
            f"support {n_par} parameters"
        )
    if k:
        full = np.column_stack([np.ones(design.w.size), design.xw])
        if np.linalg.matrix_rank(full) < full.shape[1]:
            raise FittingError(
                f"collinear exogenous regressors: {list(exog_names)}"
            )

    # Pure AR without exogenous terms minimizes CSS in closed form via OLS.
    fast = (
        spec.q == 0 and k == 0
        and (spec.seasonal is None or (spec.seasonal[0] == 0 and spec.seasonal[2] == 0))
    )
    params = converged = None
    if fast:
        params, converged = _fit_ar_ols(design)
    if params is None:
        params, converged = _fit_css_numeric(design, seed, starts)

    css = _css_value(params, design)
    c, gamma, ar, ma, sar, sma, full_ar, full_ma = _unpack(params, design)
    if _near_unit_root(full_ar) or _near_unit_root(-full_ma):
        converged = False
    e = design.w - c
    if gamma.size:
        e = e - design.xw @ gamma
    eps = _arma_resid(e, full_ar, full_ma)
    p_eff = full_ar.size
    residuals = eps[p_eff:]
    n_used = residuals.size
    sigma2 = css / n_used if n_used else math.nan
    gamma_ps = (
        _gamma_p_values(params, design, css, n_used) if compute_p_values else ()
    )
    return FittedArima(
        spec=spec,
        intercept=float(c),
        ar=ar,
        ma=ma,
        seasonal_ar=sar,
        seasonal_ma=sma,
        gamma=np.asarray(gamma, dtype=float),
        exog_names=exog_names,
        sigma2=float(sigma2),
        css=float(css),
        converged=bool(converged),
        residuals=residuals,
        n_params=n_par,
        gamma_p_values=gamma_ps,
    )


def _fit_ar_ols(design: _Design):
    """Closed-form CSS minimizer for pure AR specs (no MA, no exogenous)."""
    spec = design.spec
    w = design.w
    p = spec.p
    if w.size <= p + 1:
        return None, None
    y = w[p:]
    cols = [w[p - i : w.size - i] for i in range(1, p + 1)]
    X = np.column_stack([np.ones(y.size)] + cols) if spec.include_intercept else (
        np.column_stack(cols) if cols else np.zeros((y.size, 0))
    )
    if X.shape[1] == 0:
        return np.zeros(0), True
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    if spec.include_intercept:
        c_prime, ar = beta[0], beta[1:]
    else:
        c_prime, ar = 0.0, beta
    if p and not ar_stationary(ar):
        return None, None   # boundary case: fall back to the constrained path
    denom = 1.0 - ar.sum()
    c = c_prime / denom if abs(denom) > 1e-10 else 0.0
    params = np.zeros(_n_model_params(spec, 0))
    pos = 0
    if spec.include_intercept:
        params[0] = c
        pos = 1
    if p:
        params[pos : pos + p] = _stable_to_raw(ar)
    return params, True


def _fit_css_numeric(design: _Design, seed: int, starts: int):
    base = _initial_params(design)
    rng = np.random.default_rng(seed)
    best = None
    best_val = math.inf
    converged = False
    for s in range(max(1, starts)):
        x0 = base if s == 0 else base + rng.normal(0.0, 0.3, size=base.size)
        res = minimize(
            _css_value,
            x0,
            args=(design,),
            method="Nelder-Mead",
            options={
                "maxiter": _CSS_MAXITER,
                "maxfev": 2 * _CSS_MAXITER,
                "fatol": 1e-10 * max(1.0, _css_value(x0, design)),
                "xatol": 1e-8,
            },
        )
        if res.fun < best_val:
            best_val = res.fun
            best = res.x
            converged = bool(res.success)
    if best is None or not np.all(np.isfinite(best)):
        raise FittingError(f"{design.spec.label}: optimizer failed")
    return best, converged


def fit_arima(
    y: WeeklySeries,
    spec: ArimaSpec,
    X: Sequence[WeeklySeries] | None = None,
    seed: int = 0,
    starts: int = _N_STARTS,
    compute_p_values: bool = False,
) -> FittedArima:
    """Fit an ARIMA candidate, optionally with exogenous regressors.

    Exogenous series are aligned with the target; the regression residual
    follows the ARIMA process and everything is estimated jointly by CSS.
    Non-convergence returns a usable fit with ``converged`` lowered.
    """
    if X:
        aligned = align([y, *X])
        yv = np.asarray(aligned[0].values)
        xv = np.column_stack([np.asarray(s.values) for s in aligned[1:]])
        names = tuple(s.name for s in aligned[1:])
        if np.isnan(yv).any() or np.isnan(xv).any():
            raise FittingError("missing values in fitting sample")
        return _fit_arima_arrays(yv, spec, xv, names, seed, starts, compute_p_values)
    yv = np.asarray(y.values)
    if np.isnan(yv).any():
        raise FittingError("missing values in fitting sample")
    return _fit_arima_arrays(yv, spec, None, (), seed, starts, compute_p_values)


# ---------------------------------------------------------------------------
# Exponential smoothing


_ES_VARIANTS = ("simple", "holt-additive", "damped")


def _es_path(
    y: np.ndarray, variant: str, alpha: float, beta: float, phi: float
) -> tuple[np.ndarray, float]:
    """One-step in-sample forecasts for y[1:] and the next-step forecast."""
    trend = variant != "simple"
    level = y[0]
    b = (y[1] - y[0]) if (trend and y.size > 1) else 0.0
    forecasts = np.empty(y.size - 1)
    for t in range(1, y.size):
        f = level + phi * b if trend else level
        forecasts[t - 1] = f
        prev_level = level
        if trend:
            level = alpha * y[t] + (1.0 - alpha) * (prev_level + phi * b)
            b = beta * (level - prev_level) + (1.0 - beta) * phi * b
        else:
            level = alpha * y[t] + (1.0 - alpha) * level
    next_forecast = level + phi * b if trend else level
    return forecasts, float(next_forecast)


def fit_es(y: WeeklySeries, variant: str = "simple") -> FittedEs:
    """Fit an additive exponential-smoothing variant.

    Smoothing parameters are chosen in (0, 1) by bounded minimization of the
    one-step in-sample squared error.
    """
    if variant not in _ES_VARIANTS:
        raise FittingError(f"unknown smoothing variant {variant!r}")
    yv = np.asarray(y.values)
    if np.isnan(yv).any():
        raise FittingError("missing values in fitting sample")
    if yv.size < 10:
        raise FittingError("exponential smoothing needs at least 10 observations")

    trend = variant != "simple"
    damped = variant == "damped"

    def objective(params):
        a = params[0]
        b = params[1] if trend else 0.0
        ph = params[2] if damped else (1.0 if trend else 0.0)
        f, _ = _es_path(yv, variant, a, b, ph)
        err = yv[1:] - f
        return float(np.dot(err, err))

    if damped:
        x0, bounds = [0.5, 0.3, 0.9], [(1e-3, 1 - 1e-3)] * 2 + [(0.6, 0.98)]
    elif trend:
        x0, bounds = [0.5, 0.3], [(1e-3, 1 - 1e-3)] * 2
    else:
        x0, bounds = [0.5], [(1e-3, 1 - 1e-3)]
    res = minimize(objective, x0, method="L-BFGS-B", bounds=bounds)
    a = float(res.x[0])
    b = float(res.x[1]) if trend else 0.0
    ph = float(res.x[2]) if damped else (1.0 if trend else 0.0)
    forecasts, _ = _es_path(yv, variant, a, b, ph)
    residuals = yv[1:] - forecasts
    return FittedEs(
        variant=variant,
        alpha=a,
        beta=b,
        phi=ph,
        sse=float(np.dot(residuals, residuals)),
        converged=bool(res.success),
        residuals=residuals,
        n_params=len(x0),
    )


# ---------------------------------------------------------------------------
# Evaluation metrics and ranking


def _values(series) -> np.ndarray:
    return np.asarray(getattr(series, "values", series), dtype=float)


def mape(actual, forecast) -> float:
    """Mean absolute percentage error of paired values, in percent."""
    a = _values(actual)
    f = _values(forecast)
    if a.size != f.size:
        raise ValueError("actual and forecast must have equal length")
    if np.any(a == 0):
        raise ValueError("MAPE undefined: actual contains zero")
    return float(np.mean(np.abs((a - f) / a)) * 100.0)


def direction_accuracy(actual, forecast) -> float:
    """Share of steps whose forecast move matches the actual move, percent.

    Step t compares sign(forecast[t+1] - actual[t]) against
    sign(actual[t+1] - actual[t]); only strictly matching signs count, so
    zero-move steps are misses.
    """
    a = _values(actual)
    f = _values(forecast)
    if a.size != f.size:
        raise ValueError("actual and forecast must have equal length")
    if a.size < 2:
        raise ValueError("direction accuracy needs at least 2 observations")
    hits = (f[1:] - a[:-1]) * (a[1:] - a[:-1]) > 0
    return float(np.mean(hits) * 100.0)


def stationary_r2(model, y: WeeklySeries) -> float:
    """Fit relative to the mean model on the maximally differenced scale.

    1 - MSE(model) / MSE(baseline) where the baseline predicts each
    differenced value by the mean of the differenced series.  0 means
    baseline-equivalent; range is (-inf, 1].
    """
    yv = np.asarray(y.values)
    d = model.diff_order
    sd, period = model.seasonal_diff
    dy = _apply_diff(yv, d, sd, period)
    dev = dy - dy.mean()
    mse_base = float(np.mean(dev ** 2))
    if mse_base == 0:
        raise FittingError("baseline undefined: differenced series is constant")
    mse_model = float(np.mean(model.residuals ** 2))
    return 1.0 - mse_model / mse_base


def _rank_score(model) -> float:
    """Small-sample corrected ranking score (higher is better).

    One-step residuals on the differenced scale equal level-scale one-step
    errors, so candidates with different differencing orders are comparable
    on residual MSE directly; ranking by each candidate's own
    differenced-scale baseline would systematically reward over-differencing.
    The AICc-style parameter penalty keeps white noise from rewarding
    spurious ARMA structure at desk-scale sample sizes.
    """
    resid = model.residuals
    n = resid.size
    k = model.n_params + 1          # innovation variance counts
    if n - k - 1 <= 0 or n < 3:
        return -math.inf
    mse = float(np.dot(resid, resid)) / n
    if mse <= 0:
        return math.inf
    return -(n * math.log(mse) + 2 * k + 2 * k * (k + 1) / (n - k - 1))


# ---------------------------------------------------------------------------
# Mining and stepwise selection


@dataclass(frozen=True)
class Candidate:
    label: str
    model: object
    r2: float                   # stationary R², the reported metric
    rank_score: float           # internal ranking criterion
    order: int


@dataclass(frozen=True)
class MiningResult:
    best: object
    candidates: tuple[Candidate, ...]
    failures: tuple[tuple[str, str], ...]


def mine_models(
    y: WeeklySeries,
    X: Sequence[WeeklySeries] | None = None,
    search: SearchSpace | None = None,
    seed: int = 0,
) -> MiningResult:
    """Fit the candidate grid and pick the best model for the sample.

    Candidates are ranked on the training window by one-step residual fit
    against the undifferenced mean baseline, adjusted for parameter count
    (so white noise does not reward spurious structure and over-differencing
    is not rewarded by its own inflated baseline); ties break toward fewer
    parameters, then grid order.  The reported stationary R-squared stays
    on each candidate's own differenced scale.  Exogenous regressors apply
    to the ARIMA candidates only.
    """
    search = search or SearchSpace()
    candidates: list[Candidate] = []
    failures: list[tuple[str, str]] = []
    order = 0
    for spec in search.arima_specs():
        try:
            model = fit_arima(y, spec, X=X, seed=seed)
            if not model.converged:
                failures.append((spec.label, "did not converge"))
            else:
                r2 = stationary_r2(model, y)
                candidates.append(
                    Candidate(model.label, model, r2, _rank_score(model), order)
                )
        except (FittingError, ValueError) as exc:
            failures.append((spec.label, str(exc)))
        order += 1
    if search.include_es:
        for variant in _ES_VARIANTS:
            try:
                model = fit_es(y, variant)
                r2 = stationary_r2(model, y)
                candidates.append(
                    Candidate(model.label, model, r2, _rank_score(model), order)
                )
            except (FittingError, ValueError) as exc:
                failures.append((f"ES({variant})", str(exc)))
            order += 1
    if not candidates:
        detail = "; ".join(f"{lbl}: {msg}" for lbl, msg in failures[:5])
        raise MiningError(f"no candidate converged ({detail})")
    best_score = max(c.rank_score for c in candidates)
    contenders = [c for c in candidates if c.rank_score >= best_score - 1e-9]
    winner = min(contenders, key=lambda c: (c.model.n_params, c.order))
    return MiningResult(winner.model, tuple(candidates), tuple(failures))


def stepwise_select(
    y: WeeklySeries,
    candidates: Sequence[WeeklySeries],
    spec: ArimaSpec,
    seed: int = 0,
    threshold: float = 0.05,
) -> tuple[list[WeeklySeries], FittedArima]:
    """Forward selection of exogenous predictors under a fixed base spec.

    Each round adds the candidate whose coefficient has the smallest
    asymptotic t-test p-value below the threshold; stops when no addition
    qualifies.  Ties break by candidate order.  Empty selection is valid
    and returns the plain fit.
    """
    selected: list[WeeklySeries] = []
    remaining = list(candidates)
    current = fit_arima(y, spec, X=None, seed=seed)
    while remaining:
        best_idx = None
        best_p = threshold
        best_fit = None
        for i, cand in enumerate(remaining):
            try:
                trial = fit_arima(
                    y, spec, X=selected + [cand], seed=seed, compute_p_values=True
                )
            except (FittingError, ValueError):
                continue
            p = trial.gamma_p_values[-1]
            if p < best_p:
                best_p = p
                best_idx = i
                best_fit = trial
        if best_idx is None:
            break
        selected.append(remaining.pop(best_idx))
        current = best_fit
    return selected, current


# ---------------------------------------------------------------------------
# Rolling one-step evaluation


def _undiff_next(w_next: float, y_hist: np.ndarray, d: int,
                 seasonal_d: int, period: int) -> float:
    """Reconstruct the next level value from a differenced-scale forecast."""
    levels = [y_hist]
    for _ in range(seasonal_d):
        levels.append(levels[-1][period:] - levels[-1][:-period])
    for _ in range(d):
        levels.append(levels[-1][1:] - levels[-1][:-1])
    value = w_next
    # Invert in reverse order of application: regular diffs, then seasonal.
    for idx in range(len(levels) - 2, -1, -1):
        if idx >= seasonal_d:      # this level was regular-differenced next
            value += levels[idx][-1]
        else:                      # this level was seasonally differenced next
            value += levels[idx][-period]
    return float(value)


def _es_one_step(model: FittedEs, y_hist: np.ndarray) -> float:
    _, nxt = _es_path(y_hist, model.variant, model.alpha, model.beta, model.phi)
    return nxt


def rolling_forecast(
    model,
    y: WeeklySeries,
    X: Sequence[WeeklySeries] | None,
    n_test: int,
) -> ForecastBlock:
    """One-step-ahead forecasts over the final *n_test* weeks.

    Parameters stay frozen at their training values; only the state is
    updated with realized actuals.  No value at or beyond the forecast week
    is ever read.
    """
    if n_test < 1:
        raise FittingError("test window is empty")
    n = len(y)
    train_n = n - n_test
    if train_n < 2:
        raise FittingError("training window too short")
    yv = np.asarray(y.values)
    xv = None
    if X:
        aligned = align([y, *X])
        xv = np.column_stack([np.asarray(s.values) for s in aligned[1:]])

    forecasts = []
    for i in range(n_test):
        idx = train_n + i
        hist = yv[:idx]
        if isinstance(model, FittedEs):
            forecasts.append(_es_one_step(model, hist))
        else:
            xh = xv[: idx + 1] if (xv is not None and model.gamma.size) else None
            forecasts.append(_arima_one_step(model, hist, xh))
    forecasts = np.asarray(forecasts)
    actuals = yv[train_n:]
    weeks = y.weeks[train_n:]

    anchor = yv[train_n - 1]
    ext_actual = np.concatenate([[anchor], actuals])
    ext_forecast = np.concatenate([[anchor], forecasts])
    finite = np.all(np.isfinite(actuals))
    return ForecastBlock(
        model_label=model.label,
        predictors=tuple(getattr(model, "exog_names", ())),
        mape=mape(actuals, forecasts) if finite and not np.any(actuals == 0)
        else math.nan,
        direction_accuracy=direction_accuracy(ext_actual, ext_forecast)
        if finite else math.nan,
        stationary_r2=math.nan,
        weeks=tuple(weeks),
        actuals=tuple(actuals),
        forecasts=tuple(forecasts),
    )


def _arima_one_step(model: FittedArima, y_hist: np.ndarray,
                    x_hist: np.ndarray | None) -> float:
    """Forecast the next value from history with parameters frozen.

    ``x_hist`` carries one more row than ``y_hist``: the exogenous values
    for the week being forecast (already lagged, so known in advance).
    """
    spec = model.spec
    if spec.seasonal is not None:
        _, D, _, period = spec.seasonal
    else:
        D, period = 0, 1
    w = _apply_diff(y_hist, spec.d, D, period)
    full_ar = _combine(model.ar, model.seasonal_ar, period)
    full_ma = _combine_ma(model.ma, model.seasonal_ma, period)
    adj = w - model.intercept
    x_next_effect = 0.0
    if model.gamma.size:
        if x_hist is None or x_hist.shape[0] != y_hist.size + 1:
            raise FittingError(
                "exogenous history must extend one row past the target history"
            )
        xw = np.column_stack(
            [_apply_diff(x_hist[:, j], spec.d, D, period)
             for j in range(x_hist.shape[1])]
        )
        adj = adj - xw[:-1] @ model.gamma
        x_next_effect = float(xw[-1] @ model.gamma)
    eps = _arma_resid(adj, full_ar, full_ma)
    m = adj.size
    pred = model.intercept + x_next_effect
    for i, a in enumerate(full_ar, start=1):
        if m - i >= 0:
            pred += a * adj[m - i]
    for j, b in enumerate(full_ma, start=1):
        if m - j >= 0:
            pred += b * eps[m - j]
    return _undiff_next(pred, y_hist, spec.d, D, period)


# ---------------------------------------------------------------------------
# With/without predictor comparison


def compare_with_without(
    security: str,
    target: WeeklySeries,
    predictors: Sequence[WeeklySeries],
    split: float = 0.76,
    n_test: int | None = None,
    search: SearchSpace | None = None,
    seed: int = 0,
    predictor_lag: int = 1,
) -> ForecastReport:
    """Run the mining pipeline twice, with predictors available and withheld.

    Predictors enter as lagged series (past information only).  Both runs
    share the identical train/test split; the report carries both blocks.
    """
    search = search or SearchSpace()
    usable = [p for p in predictors if not np.isnan(np.asarray(p.values)).any()]
    lagged = [
        lag(p, predictor_lag).rename(f"{p.name}_lag{predictor_lag}")
        for p in usable
        if len(p) > predictor_lag
    ]
    aligned = align([target] + lagged)
    y = aligned[0]
    lagged = aligned[1:]
    n = len(y)
    if n_test is None:
        n_test = n - int(round(split * n))
    if n_test < 1:
        raise FittingError("split leaves no test weeks")
    train_end = n - n_test
    y_train = y.slice(y.start, y.start.shift(train_end - 1))
    x_train = [s.slice(y_train.start, y_train.end) for s in lagged]

    without_mining = mine_models(y_train, X=None, search=search, seed=seed)
    without_model = without_mining.best
    without_block = rolling_forecast(without_model, y, None, n_test)
    without_block = _with_r2(without_block, without_model, y_train)

    base_spec = (
        without_model.spec
        if isinstance(without_model, FittedArima)
        else ArimaSpec(1, 0, 0)
    )
    selected, _ = stepwise_select(y_train, x_train, base_spec, seed=seed)
    if selected:
        sel_names = [s.name for s in selected]
        sel_full = [s for s in lagged if s.name in sel_names]
        with_mining = mine_models(y_train, X=selected, search=search, seed=seed)
        with_model = with_mining.best
        x_for_roll = sel_full if isinstance(with_model, FittedArima) and \
            with_model.gamma.size else None
        with_block = rolling_forecast(with_model, y, x_for_roll, n_test)
        with_block = _with_r2(with_block, with_model, y_train)
    else:
        with_block = without_block
    return ForecastReport(
        security=security,
        target=target.name,
        with_predictors=with_block,
        without_predictors=without_block,
    )


def _with_r2(block: ForecastBlock, model, y_train: WeeklySeries) -> ForecastBlock:
    return ForecastBlock(
        model_label=block.model_label,
        predictors=block.predictors,
        mape=block.mape,
        direction_accuracy=block.direction_accuracy,
        stationary_r2=stationary_r2(model, y_train),
        weeks=block.weeks,
        actuals=block.actuals,
        forecasts=block.forecasts,
    )
