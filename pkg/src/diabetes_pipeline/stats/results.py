from dataclasses import asdict, dataclass, field

import numpy as np

ALPHA = 0.05


@dataclass(frozen=True)
class RankVector:
    ranks: np.ndarray
    tie_sizes: tuple

    @property
    def n(self):
        return len(self.ranks)


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    n: int
    t_statistic: float
    p_value: float
    method: str = "t-approximation"


@dataclass
class HypothesisResult:
    """One row of a Table-2 style summary.

    ``decision`` compares the Holm-adjusted p when the test belongs to a
    family, otherwise the raw p, against ``alpha`` (strict inequality).
    """

    test: str
    statistic: float
    p_value: float
    statistic_name: str = ""
    df: float | None = None
    variables: str = ""
    p_adjusted: float | None = None
    alpha: float = ALPHA
    two_tailed: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def reject(self):
        p = self.p_adjusted if self.p_adjusted is not None else self.p_value
        return p < self.alpha

    @property
    def decision(self):
        return "Reject" if self.reject else "Fail to reject"

    def to_dict(self):
        out = asdict(self)
        out["decision"] = self.decision
        return out


@dataclass(frozen=True)
class HolmAdjustment:
    raw: tuple
    adjusted: tuple

    @property
    def m(self):
        return len(self.raw)
