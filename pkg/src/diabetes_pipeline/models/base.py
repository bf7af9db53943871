import numpy as np

from ..errors import ContractError

FORMAT_VERSION = 1


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def check_binary(y):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ContractError("labels must be a 1-D vector")
    if not np.all(np.isin(y, (0, 1))):
        raise ContractError("labels must be 0/1")
    return y.astype(int)


class TrainedClassifier:
    """Shared prediction surface.

    Subclasses implement ``positive_proba`` and ``decision_score`` (a strictly
    increasing transform of the positive-class probability).
    """

    variant = None

    def __init__(self, n_features, feature_names=None, meta=None):
        self.n_features = int(n_features)
        self.feature_names = list(feature_names) if feature_names is not None else None
        self.meta = dict(meta or {})

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ContractError(
                f"{self.variant} was trained on {self.n_features} features, got shape {X.shape}"
            )
        return X

    def positive_proba(self, X):
        raise NotImplementedError

    def predict_proba(self, X):
        p1 = np.clip(self.positive_proba(X), 0.0, 1.0)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.positive_proba(X) > 0.5).astype(int)

    def _header(self):
        return {
            "format_version": FORMAT_VERSION,
            "variant": self.variant,
            "n_features": self.n_features,
            "feature_names": self.feature_names,
            "meta": self.meta,
        }
