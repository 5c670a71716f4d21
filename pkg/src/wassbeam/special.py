"""Regularized incomplete gamma function and chi-squared quantiles."""

from __future__ import annotations

import math

_EPS = 1e-16
_TINY = 1e-300


def _lower_series(a: float, x: float) -> float:
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_continued_fraction(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_lower_gamma(a: float, x: float) -> float:
    """P(a, x) = gamma(a, x) / Gamma(a) for a > 0, x >= 0."""
    if a <= 0:
        raise ValueError("shape a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _lower_series(a, x))
    return max(0.0, 1.0 - _upper_continued_fraction(a, x))


def gamma_quantile(a: float, p: float, rtol: float = 1e-10) -> float:
    """Inverse of ``x -> P(a, x)`` by bisection."""
    if not 0.0 < p < 1.0:
        raise ValueError("probability must lie in (0, 1)")
    lo, hi = 0.0, max(1.0, a)
    while regularized_lower_gamma(a, hi) < p:
        lo, hi = hi, 2.0 * hi
    # bisect well past rtol so the returned midpoint is safely inside it
    for _ in range(2_000):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if regularized_lower_gamma(a, mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-3 * rtol * hi:
            break
    return 0.5 * (lo + hi)


def chi2_quantile(dof: float, p: float) -> float:
    """The p-quantile of a chi-squared law, via chi2_k / 2 ~ Gamma(k / 2)."""
    return 2.0 * gamma_quantile(dof / 2.0, p)
