"""Gradient boosting on logistic deviance with depth-limited regression trees."""

import numpy as np

from ..errors import ContractError
from .base import TrainedClassifier, check_binary, sigmoid
from .forest import tree_rng
from .specs import GradBoostSpec
from .tree import Tree, fit_cart


def deviance(y, raw):
    """Mean binomial deviance (negative log-likelihood) of raw log-odds scores."""
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def newton_leaf_values(leaf_ids, grad, hess, n_nodes):
    """Per-leaf sum(grad) / sum(hess) with ``grad`` the negative gradient y - p."""
    num = np.bincount(leaf_ids, weights=grad, minlength=n_nodes)
    den = np.bincount(leaf_ids, weights=hess, minlength=n_nodes)
    safe = np.abs(den) > 1e-150
    return np.where(safe, num / np.where(safe, den, 1.0), 0.0)


class BoostedModel(TrainedClassifier):
    variant = "gradient_boosting"
    output_space = "log-odds"

    def __init__(self, init_score, trees, learning_rate, n_features, **kwargs):
        super().__init__(n_features, **kwargs)
        self.init_score = float(init_score)
        self.trees = list(trees)
        self.learning_rate = float(learning_rate)

    def raw_score(self, X):
        X = self._check(X)
        raw = np.full(len(X), self.init_score)
        for tree in self.trees:
            raw += tree.predict(X)
        return raw

    def decision_score(self, X):
        return self.raw_score(X)

    def positive_proba(self, X):
        return sigmoid(self.raw_score(X))

    def additive_trees(self):
        return self.init_score, np.ones(len(self.trees)), self.trees

    def to_dict(self):
        return {**self._header(), "init_score": self.init_score,
                "learning_rate": self.learning_rate, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["init_score"], [Tree.from_dict(t) for t in d["trees"]], d["learning_rate"],
                   d["n_features"], feature_names=d.get("feature_names"), meta=d.get("meta"))


def fit_gradient_boosting(X, y, spec=None, feature_names=None):
    """Stagewise fit. Tree leaf values are stored already multiplied by the learning rate."""
    spec = spec or GradBoostSpec()
    X = np.asarray(X, dtype=float)
    y = check_binary(y)
    if len(np.unique(y)) < 2:
        raise ContractError("gradient boosting needs both classes in y")
    base_rate = y.mean()
    init = float(np.log(base_rate / (1.0 - base_rate)))
    raw = np.full(len(y), init)
    history = [deviance(y, raw)]
    trees = []
    for m in range(spec.n_trees):
        p = sigmoid(raw)
        grad = y - p
        hess = p * (1.0 - p)
        tree = fit_cart(X, grad, max_depth=spec.max_depth, split_mode="best",
                        max_features=None, rng=tree_rng(spec.seed, m))
        leaves = tree.apply(X)
        step = newton_leaf_values(leaves, grad, hess, tree.n_nodes)
        tree.value = np.where(tree.is_leaf, spec.learning_rate * step, 0.0)
        raw += tree.value[leaves]
        trees.append(tree)
        history.append(deviance(y, raw))
    return BoostedModel(init, trees, spec.learning_rate, X.shape[1], feature_names=feature_names,
                        meta={"seed": spec.seed, "train_deviance": history})
