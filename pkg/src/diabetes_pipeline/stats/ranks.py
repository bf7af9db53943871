"""Rank-based statistics: average ranks, Spearman correlation, Kruskal-Wallis."""

import itertools
import math

import numpy as np

from ..errors import ContractError, DegenerateDataError
from .results import CorrelationResult, HypothesisResult, RankVector
from .special import chi2_sf, t_sf


def average_ranks(x):
    """1-based ranks; tied values share the mean of the positions they span."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ContractError("ranking needs a 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ContractError("ranking needs finite values")
    n = len(x)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # run boundaries of equal values in sorted order
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], n]
    sizes = ends - starts
    # mean of positions start+1 .. end  ==  (start + 1 + end) / 2
    run_rank = (starts + 1 + ends) / 2.0
    ranks = np.empty(n)
    ranks[order] = np.repeat(run_rank, sizes)
    return RankVector(ranks=ranks, tie_sizes=tuple(int(t) for t in sizes if t > 1))


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / denom


def _exact_spearman_p(rx, ry, rho):
    """Two-sided permutation p over all n! re-pairings (small n only)."""
    n = len(rx)
    hits = 0
    total = 0
    perms = itertools.permutations(ry)
    while True:
        block = np.array(list(itertools.islice(perms, 50_000)))
        if block.size == 0:
            break
        bc = block - block.mean(axis=1, keepdims=True)
        ac = rx - rx.mean()
        r = (bc @ ac) / np.sqrt((bc * bc).sum(axis=1) * (ac @ ac))
        hits += int(np.count_nonzero(np.abs(r) >= abs(rho) - 1e-12))
        total += len(block)
    return hits / total


def spearman(x, y, exact=False):
    """Spearman's rho with a two-sided p-value.

    The default p uses t = rho * sqrt((n - 2) / (1 - rho**2)) on n - 2 degrees
    of freedom. ``exact=True`` enumerates every permutation and is limited to
    n <= 10.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractError("spearman needs two 1-D vectors of equal length")
    n = len(x)
    if n < 3:
        raise ContractError(f"spearman needs n >= 3, got {n}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateDataError("correlation undefined for a constant vector")
    rx = average_ranks(x).ranks
    ry = average_ranks(y).ranks
    rho = max(-1.0, min(1.0, float(_pearson(rx, ry))))
    df = n - 2
    if abs(rho) >= 1.0:
        t = math.copysign(math.inf, rho)
        p_t = 0.0
    else:
        t = rho * math.sqrt(df / (1.0 - rho * rho))
        p_t = min(1.0, 2.0 * t_sf(abs(t), df))
    if exact:
        if n > 10:
            raise ContractError("exact permutation p is limited to n <= 10")
        return CorrelationResult(rho, n, t, _exact_spearman_p(rx, ry, rho), method="exact")
    return CorrelationResult(rho, n, t, p_t)


def kruskal_wallis(groups, tie_correction=True):
    """Kruskal-Wallis H on pooled average ranks, chi-square on k - 1 df."""
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2:
        raise ContractError("Kruskal-Wallis needs at least two groups")
    if any(len(g) == 0 for g in groups):
        raise ContractError("every group must be non-empty")
    pooled = np.concatenate(groups)
    big_n = len(pooled)
    if big_n < 3:
        raise ContractError("Kruskal-Wallis needs N >= 3 observations")
    rv = average_ranks(pooled)
    centre = (big_n + 1) / 2.0
    h = 0.0
    start = 0
    for g in groups:
        r = rv.ranks[start:start + len(g)]
        start += len(g)
        h += len(g) * (r.mean() - centre) ** 2
    h *= 12.0 / (big_n * (big_n + 1))
    correction = 1.0
    if tie_correction:
        t = np.asarray(rv.tie_sizes, dtype=float)
        correction = 1.0 - float(np.sum(t**3 - t)) / (big_n**3 - big_n)
        if correction <= 0:
            raise DegenerateDataError("all observations are identical; H is undefined")
        h /= correction
    df = len(groups) - 1
    return HypothesisResult(
        test="Kruskal-Wallis",
        statistic=float(h),
        statistic_name="H",
        p_value=float(chi2_sf(float(h), df)),
        df=df,
        extra={"tie_correction": correction, "group_sizes": [len(g) for g in groups]},
    )
