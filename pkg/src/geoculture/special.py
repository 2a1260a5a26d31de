"""Regularized incomplete beta function and the F-distribution upper tail."""

from __future__ import annotations

import math

MAX_ITER = 200
EPS = 1e-14
_TINY = 1e-300


class ConvergenceError(ArithmeticError):
    pass


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        # odd step
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
        if abs(delta - 1.0) < EPS:
            return h
    raise ConvergenceError(
        f"incomplete beta continued fraction did not converge in {MAX_ITER} iterations "
        f"(a={a}, b={b}, x={x})")


def _log_front(a: float, b: float, x: float, y: float) -> float:
    return (a * math.log(x) + b * math.log(y)
            + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))


def betainc(a: float, b: float, x: float, y: float | None = None) -> float:
    """Regularized incomplete beta ``I_x(a, b)``.

    ``y`` may carry ``1 - x`` computed without cancellation by the caller.
    """
    if a <= 0 or b <= 0:
        raise ValueError("betainc requires a > 0 and b > 0")
    if y is None:
        y = 1.0 - x
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if y == 0.0:
        return 1.0
    if a == b and x == y:
        return 0.5
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(_log_front(a, b, x, y)) * _betacf(a, b, x) / a
    return 1.0 - math.exp(_log_front(a, b, x, y)) * _betacf(b, a, y) / b


def f_tail(f: float, df1: int, df2: int) -> float:
    """Upper tail ``P(F > f)`` of the F distribution with ``(df1, df2)`` degrees of freedom."""
    if df1 < 1 or df2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if math.isnan(f) or f < 0:
        raise ValueError(f"F statistic must be >= 0, got {f}")
    if f == 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    denom = df2 + df1 * f
    x = df2 / denom
    y = df1 * f / denom
    p = betainc(df2 / 2.0, df1 / 2.0, x, y)
    return min(1.0, max(0.0, p))
