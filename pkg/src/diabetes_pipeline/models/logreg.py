"""Class-weighted logistic regression by damped Newton with backtracking."""

import numpy as np

from ..errors import ContractError
from .base import TrainedClassifier, check_binary, sigmoid
from .specs import LogRegSpec


class LogisticModel(TrainedClassifier):
    variant = "logreg"

    def __init__(self, coef, intercept, **kwargs):
        super().__init__(len(coef), **kwargs)
        self.coef = np.asarray(coef, dtype=float)
        self.intercept = float(intercept)

    def decision_score(self, X):
        return self._check(X) @ self.coef + self.intercept

    def positive_proba(self, X):
        return sigmoid(self.decision_score(X))

    def to_dict(self):
        return {**self._header(), "coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_dict(cls, d):
        return cls(d["coef"], d["intercept"], feature_names=d.get("feature_names"), meta=d.get("meta"))


def balanced_weights(y):
    """Per-sample weights n / (2 * n_c)."""
    y = check_binary(y)
    n = len(y)
    counts = np.bincount(y, minlength=2)
    return (n / (2.0 * counts))[y]


def weighted_logloss(w, X1, y, s):
    """Mean weighted logistic loss and its gradient; ``X1`` carries a trailing ones column."""
    z = X1 @ w
    loss = float(np.mean(s * (np.logaddexp(0.0, z) - y * z)))
    grad = X1.T @ (s * (sigmoid(z) - y)) / len(y)
    return loss, grad


def fit_logreg(X, y, spec=None, feature_names=None):
    """Minimise the (optionally balanced) logistic loss, no penalty term.

    Stops when the gradient max-norm drops below ``spec.tol`` or after
    ``spec.max_iter`` Newton iterations.
    """
    spec = spec or LogRegSpec()
    X = np.asarray(X, dtype=float)
    y = check_binary(y)
    if len(np.unique(y)) < 2:
        raise ContractError("logistic regression needs both classes in y")
    n, p = X.shape
    s = balanced_weights(y) if spec.class_weight == "balanced" else np.ones(n)
    X1 = np.column_stack([X, np.ones(n)])
    w = np.zeros(p + 1)
    loss, grad = weighted_logloss(w, X1, y, s)
    iterations = 0
    while iterations < spec.max_iter and np.max(np.abs(grad)) >= spec.tol:
        pr = sigmoid(X1 @ w)
        h = (X1 * (s * pr * (1 - pr))[:, None]).T @ X1 / n
        try:
            step = -np.linalg.solve(h + 1e-12 * np.eye(p + 1), grad)
            if not np.all(np.isfinite(step)) or step @ grad >= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -grad
        slope = float(step @ grad)
        t = 1.0
        while True:
            cand = w + t * step
            new_loss, new_grad = weighted_logloss(cand, X1, y, s)
            if new_loss <= loss + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                break
        if t < 1e-12 or new_loss > loss:
            break
        w, loss, grad = cand, new_loss, new_grad
        iterations += 1
    converged = bool(np.max(np.abs(grad)) < spec.tol)
    return LogisticModel(
        w[:p], w[p], feature_names=feature_names,
        meta={"iterations": iterations, "converged": converged, "loss": loss, "seed": spec.seed},
    )
