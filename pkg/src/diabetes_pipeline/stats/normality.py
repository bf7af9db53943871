"""Shapiro-Wilk W with Royston's (1995, AS R94) coefficient and p-value approximation."""

import math
from statistics import NormalDist

import numpy as np

from ..errors import ContractError, DegenerateDataError
from .results import HypothesisResult
from .special import normal_sf

_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coefs, x):
    return sum(c * x**i for i, c in enumerate(coefs))


def shapiro_coefficients(n):
    """Upper-half coefficients a_n, a_{n-1}, ... (positive, largest first)."""
    if n == 3:
        return np.array([math.sqrt(0.5)])
    half = n // 2
    ppf = NormalDist().inv_cdf
    m = np.array([ppf((i - 0.375) / (n + 0.25)) for i in range(1, half + 1)])
    summ2 = 2.0 * float(m @ m)
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    a = -m.copy()
    if n > 5:
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1**2 - 2 * a2**2))
        a /= fac
        a[1] = a2
    else:
        fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1**2))
        a /= fac
    a[0] = a1
    return a


def shapiro_wilk(x):
    x = np.sort(np.asarray(x, dtype=float).ravel())
    n = len(x)
    if n < 3 or n > 5000:
        raise ContractError(f"Shapiro-Wilk supports 3 <= n <= 5000, got n={n}")
    if not np.all(np.isfinite(x)):
        raise ContractError("Shapiro-Wilk needs finite values")
    centred = x - x.mean()
    ssq = float(centred @ centred)
    if ssq <= 0.0 or np.ptp(x) == 0:
        raise DegenerateDataError("zero sample variance")

    half = shapiro_coefficients(n)
    coef = np.zeros(n)
    coef[n - len(half):][::-1] = half
    coef[:len(half)] = -half
    w = min(1.0, float(coef @ x) ** 2 / ssq)

    if n == 3:
        p = max(0.0, 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.pi / 3.0))
    else:
        y = math.log1p(-w) if w < 1.0 else -math.inf
        if n <= 11:
            gamma = _poly(_G, n)
            if y >= gamma:
                p = 1e-99
            else:
                y = -math.log(gamma - y)
                mean = _poly(_C3, n)
                sd = math.exp(_poly(_C4, n))
                p = normal_sf((y - mean) / sd)
        else:
            ln = math.log(n)
            mean = _poly(_C5, ln)
            sd = math.exp(_poly(_C6, ln))
            p = normal_sf((y - mean) / sd)
    return HypothesisResult(test="Shapiro-Wilk", statistic=w, statistic_name="W", p_value=p)
