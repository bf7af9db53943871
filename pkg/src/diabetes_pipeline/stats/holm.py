import numpy as np

from ..errors import ContractError
from .results import HolmAdjustment


def holm_correct(p_values):
    """Holm step-down adjustment, returned in the caller's original order."""
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise ContractError("p values must be a flat sequence")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ContractError("p values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    scaled = (m - np.arange(m)) * p[order]
    stepped = np.minimum(np.maximum.accumulate(scaled), 1.0)
    adjusted = np.empty(m)
    adjusted[order] = stepped
    return HolmAdjustment(raw=tuple(p.tolist()), adjusted=tuple(adjusted.tolist()))
