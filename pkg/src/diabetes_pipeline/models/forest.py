"""Bagged tree ensembles: Random Forest (bootstrap, best splits) and Extra Trees."""

import numpy as np

from ..errors import ContractError
from ..parallel import parallel_map
from .base import TrainedClassifier, check_binary
from .specs import ExtraTreesSpec, RandomForestSpec
from .tree import Tree, fit_cart


def tree_rng(seed, index):
    """Independent stream per (seed, tree index); fit order cannot change results."""
    return np.random.default_rng([int(seed), int(index)])


def bootstrap_indices(rng, n):
    return rng.integers(0, n, n)


class ForestModel(TrainedClassifier):
    """Positive-class probability is the mean of per-tree leaf class frequencies."""

    def __init__(self, trees, variant, n_features, **kwargs):
        super().__init__(n_features, **kwargs)
        self.trees = list(trees)
        self.variant = variant

    def positive_proba(self, X):
        X = self._check(X)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)

    def decision_score(self, X):
        return self.positive_proba(X)

    def additive_trees(self):
        """(offset, scale per tree, trees): raw output = offset + sum(scale * tree)."""
        return 0.0, np.full(len(self.trees), 1.0 / len(self.trees)), self.trees

    output_space = "probability"

    def to_dict(self):
        return {**self._header(), "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        return cls([Tree.from_dict(t) for t in d["trees"]], d["variant"], d["n_features"],
                   feature_names=d.get("feature_names"), meta=d.get("meta"))


def _fit_one(args):
    X, y, spec, index = args
    rng = tree_rng(spec.seed, index)
    if spec.bootstrap:
        idx = bootstrap_indices(rng, len(y))
        Xb, yb = X[idx], y[idx]
    else:
        Xb, yb = X, y
    return fit_cart(Xb, yb, max_depth=spec.max_depth, split_mode=spec.split_mode,
                    max_features=spec.max_features, rng=rng)


def _fit_forest(X, y, spec, feature_names, n_jobs):
    X = np.asarray(X, dtype=float)
    y = check_binary(y)
    if len(np.unique(y)) < 2:
        raise ContractError(f"{spec.label} needs both classes in y")
    trees = parallel_map(_fit_one, [(X, y, spec, i) for i in range(spec.n_trees)], n_jobs)
    return ForestModel(trees, spec.name, X.shape[1], feature_names=feature_names,
                       meta={"seed": spec.seed, "n_trees": spec.n_trees})


def fit_random_forest(X, y, spec=None, feature_names=None, n_jobs=None):
    return _fit_forest(X, y, spec or RandomForestSpec(), feature_names, n_jobs)


def fit_extra_trees(X, y, spec=None, feature_names=None, n_jobs=None):
    return _fit_forest(X, y, spec or ExtraTreesSpec(), feature_names, n_jobs)
