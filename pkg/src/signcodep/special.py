"""Regularized incomplete gamma functions and the chi-square survival function.

Power series for x < a + 1, modified Lentz continued fraction otherwise
(the usual split; each branch converges fast on its side).
"""

import math

EPS = 1e-16
MAX_ITER = 10_000
TINY = 1e-300


def _series_p(a, x):
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
    term = total = 1.0 / a
    ap = a
    for _ in range(MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            break
    else:
        raise ArithmeticError(f"series for P({a}, {x}) did not converge")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _continued_fraction_q(a, x):
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    else:
        raise ArithmeticError(f"continued fraction for Q({a}, {x}) did not converge")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a, x):
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return _series_p(a, x)
    return 1.0 - _continued_fraction_q(a, x)


def gammainc_upper(a, x):
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _series_p(a, x)
    return _continued_fraction_q(a, x)


def chi2_sf(x, df=1):
    """Upper-tail probability of the chi-square distribution."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isnan(x):
        return math.nan
    if x <= 0:
        return 1.0
    return gammainc_upper(0.5 * df, 0.5 * x)


def chi2_cdf(x, df=1):
    if x <= 0:
        return 0.0
    return gammainc_lower(0.5 * df, 0.5 * x)
