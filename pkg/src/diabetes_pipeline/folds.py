import numpy as np

from .errors import StratificationError


def stratified_folds(y, k, seed):
    """Fold id per sample.

    Within each class (ascending label order) indices are shuffled with the
    seed and dealt round-robin; the dealing position carries over between
    classes so fold sizes differ by at most one.
    """
    y = np.asarray(y)
    if k < 2:
        raise StratificationError(f"need at least 2 folds, got {k}")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise StratificationError("stratified folds need at least two classes")
    if np.any(counts < k):
        raise StratificationError(
            f"every class needs at least {k} members for {k} folds, got counts {counts.tolist()}"
        )
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=int)
    offset = 0
    for cls in classes:
        members = rng.permutation(np.flatnonzero(y == cls))
        fold[members] = (offset + np.arange(len(members))) % k
        offset = (offset + len(members)) % k
    return fold


def fold_indices(fold, k):
    """(train, test) index pairs in fold order."""
    return [(np.flatnonzero(fold != f), np.flatnonzero(fold == f)) for f in range(k)]
