"""Nonparametric statistics engine for the metabolic-cognitive tests."""

from .holm import holm_correct
from .normality import shapiro_wilk
from .ranks import average_ranks, kruskal_wallis, spearman
from .results import ALPHA, CorrelationResult, HolmAdjustment, HypothesisResult, RankVector
from .special import betainc, chi2_sf, gammainc_upper, normal_cdf, normal_sf, t_sf

__all__ = [
    "ALPHA",
    "CorrelationResult",
    "HolmAdjustment",
    "HypothesisResult",
    "RankVector",
    "average_ranks",
    "betainc",
    "chi2_sf",
    "gammainc_upper",
    "holm_correct",
    "kruskal_wallis",
    "normal_cdf",
    "normal_sf",
    "shapiro_wilk",
    "spearman",
    "t_sf",
]
