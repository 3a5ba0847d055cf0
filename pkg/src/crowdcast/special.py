"""Regularized incomplete beta function and the tail probabilities built on it.

Self-contained continued-fraction evaluation (modified Lentz), accurate to
well under 1e-10 across the parameter ranges used by the F- and t-tests in
this package.  Kept separate so the test suite can check it against a
direct numerical-integration oracle.
"""

from __future__ import annotations

import math

__all__ = ["regularized_incomplete_beta", "f_sf", "t_sf"]

_MAX_ITER = 300
_EPS = 1e-15
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}"
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x < 0.0 or x > 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - ln_beta)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f_stat: float, dfn: float, dfd: float) -> float:
    """Upper-tail probability of the F(dfn, dfd) distribution."""
    if dfn <= 0 or dfd <= 0:
        raise ValueError("degrees of freedom must be positive")
    if f_stat <= 0.0:
        return 1.0
    x = dfd / (dfd + dfn * f_stat)
    return regularized_incomplete_beta(dfd / 2.0, dfn / 2.0, x)


def t_sf(t_stat: float, df: float, two_sided: bool = True) -> float:
    """Tail probability of Student's t with *df* degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    x = df / (df + t_stat * t_stat)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    if two_sided:
        return 2.0 * tail
    return tail if t_stat >= 0 else 1.0 - tail
