"""Distribution functions backing the p-values of the rank tests.

Regularized incomplete gamma via series / Lentz continued fraction, regularized
incomplete beta via Lentz continued fraction (Numerical Recipes layout).
"""

import math

from ..errors import ContractError

EPS = 1e-16
TINY = 1e-300
MAX_ITER = 10_000


def _gamma_series(a, x):
    """Lower regularized gamma P(a, x); converges quickly for x < a + 1."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a, x):
    """Upper regularized gamma Q(a, x) by modified Lentz; for x >= a + 1."""
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
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_upper(a, x):
    """Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0:
        raise ContractError(f"shape must be positive, got {a}")
    if x < 0:
        raise ContractError(f"x must be non-negative, got {x}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cfrac(a, x)


def _beta_cfrac(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    return h


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ContractError(f"beta parameters must be positive, got ({a}, {b})")
    if not 0.0 <= x <= 1.0:
        raise ContractError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cfrac(a, b, x) / a
    return 1.0 - front * _beta_cfrac(b, a, 1.0 - x) / b


def _check_df(df):
    if not df >= 1 or math.isinf(df):
        raise ContractError(f"degrees of freedom must be a finite value >= 1, got {df}")


def chi2_sf(x, df):
    """Survival function of the chi-square distribution."""
    _check_df(df)
    if math.isnan(x):
        raise ContractError("x must be finite")
    if x <= 0:
        return 1.0
    return gammainc_upper(df / 2.0, x / 2.0)


def t_sf(x, df):
    """Survival function P(T > x) of Student's t."""
    _check_df(df)
    if math.isnan(x):
        raise ContractError("x must be finite")
    if math.isinf(x):
        return 0.0 if x > 0 else 1.0
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + x * x))
    return tail if x >= 0 else 1.0 - tail


def normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_sf(x):
    return 0.5 * math.erfc(x / math.sqrt(2.0))
