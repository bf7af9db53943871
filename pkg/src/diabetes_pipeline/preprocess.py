"""Stage-1 cleaning chain: median imputation, IQR row filter, standardization, splits."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DataError, ImputationError, StratificationError

IQR_FACTOR = 1.5
MIN_OUTLYING_FEATURES = 2


def numeric_features(dataset):
    return [c.name for c in dataset.schema if c.role == "feature" and c.kind == "numeric"]


def imputable_columns(dataset):
    """Numeric feature columns; they are the ones the imputer and scaler touch."""
    return numeric_features(dataset)


def impute_zero_median(dataset):
    """Replace missing markers with the median of the column's present values.

    Returns the new dataset and ``{column: imputed cell count}``.
    """
    updates = {}
    counts = {}
    for name in imputable_columns(dataset):
        miss = dataset.missing_mask(name)
        col = np.asarray(dataset.column(name), dtype=float)
        if not miss.any():
            counts[name] = 0
            continue
        present = col[~miss]
        if present.size == 0:
            raise ImputationError(f"column {name!r} has no non-missing values to take a median from")
        filled = col.copy()
        filled[miss] = np.median(present)
        updates[name] = filled
        counts[name] = int(miss.sum())
    if not updates:
        return dataset, counts
    return dataset.replace(updates, note=f"median-imputed {sum(counts.values())} cells"), counts


def iqr_bounds(X):
    """Per-column (lower, upper) fences from type-7 (linear) quartiles."""
    q1, q3 = np.percentile(X, [25, 75], axis=0, method="linear")
    iqr = q3 - q1
    return q1 - IQR_FACTOR * iqr, q3 + IQR_FACTOR * iqr


def outlier_counts(X):
    lo, hi = iqr_bounds(X)
    return ((X < lo) | (X > hi)).sum(axis=1)


def iqr_filter(dataset, features=None):
    """Drop rows that are outlying on two or more numeric features (single pass)."""
    features = numeric_features(dataset) if features is None else list(features)
    for name in features:
        if dataset.missing_mask(name).any():
            raise DataError(f"iqr_filter needs imputed data; column {name!r} still has missing values")
    X = dataset.feature_matrix(features)
    counts = outlier_counts(X) if features else np.zeros(dataset.n_rows, dtype=int)
    removed = np.flatnonzero(counts >= MIN_OUTLYING_FEATURES)
    kept = np.flatnonzero(counts < MIN_OUTLYING_FEATURES)
    fragment = {
        "kept": kept,
        "removed": removed,
        "removed_row_ids": dataset.row_ids[removed].tolist(),
        "removed_outlier_counts": counts[removed].tolist(),
    }
    if removed.size == 0:
        return dataset, fragment
    return dataset.take(kept, note=f"IQR filter removed {removed.size} rows"), fragment


@dataclass(frozen=True)
class StandardizationParams:
    features: tuple
    mean: np.ndarray
    std: np.ndarray

    def _check(self, names):
        if tuple(names) != tuple(self.features):
            raise ContractError(
                f"standardizer fit on {list(self.features)} cannot be applied to {list(names)}"
            )

    @property
    def scale(self):
        return np.where(self.std > 0, self.std, 1.0)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def inverse(self, Z):
        return np.asarray(Z, dtype=float) * self.scale + self.mean

    def to_dict(self):
        return {"features": list(self.features), "mean": self.mean.tolist(), "std": self.std.tolist()}


def fit_standardizer_array(X, names):
    X = np.asarray(X, dtype=float)
    return StandardizationParams(tuple(names), X.mean(axis=0), X.std(axis=0))


def fit_standardizer(dataset, features=None):
    """Population mean/std per feature (divide by n)."""
    features = numeric_features(dataset) if features is None else list(features)
    return fit_standardizer_array(dataset.feature_matrix(features), features)


def apply_standardizer(params, dataset, features=None):
    features = list(params.features) if features is None else list(features)
    params._check(features)
    Z = params.transform(dataset.feature_matrix(features))
    return dataset.replace({n: Z[:, j] for j, n in enumerate(features)}, note="standardized")


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def stratified_counts(class_counts, fraction):
    """Per-class test allocations: rounded shares, fixed up so they sum to round(n * fraction)."""
    class_counts = np.asarray(class_counts)
    raw = class_counts * fraction
    alloc = np.array([_round_half_up(r) for r in raw])
    target = _round_half_up(class_counts.sum() * fraction)
    remainder = raw - alloc
    while alloc.sum() < target:
        order = np.argsort(-remainder, kind="stable")
        i = next(i for i in order if alloc[i] < class_counts[i])
        alloc[i] += 1
        remainder[i] -= 1
    while alloc.sum() > target:
        order = np.argsort(remainder, kind="stable")
        i = next(i for i in order if alloc[i] > 0)
        alloc[i] -= 1
        remainder[i] += 1
    return alloc


def _labels(dataset_or_y):
    if hasattr(dataset_or_y, "target"):
        return dataset_or_y.target()
    return np.asarray(dataset_or_y).astype(int)


def stratified_split(dataset_or_y, test_fraction=0.2, seed=0):
    """Seeded stratified holdout split; returns sorted (train, test) row positions."""
    y = _labels(dataset_or_y)
    if not 0.0 < test_fraction < 1.0:
        raise ContractError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise StratificationError("stratified split needs at least two classes")
    if np.any(counts < 2):
        raise StratificationError(f"every class needs >= 2 members, got counts {counts.tolist()}")
    alloc = stratified_counts(counts, test_fraction)
    rng = np.random.default_rng(seed)
    test = []
    for cls, n_test in zip(classes, alloc):
        members = rng.permutation(np.flatnonzero(y == cls))
        test.append(members[:n_test])
    test = np.sort(np.concatenate(test))
    train = np.setdiff1d(np.arange(len(y)), test)
    return train, test


@dataclass
class FeaturePipeline:
    """Median imputation followed by standardization, fit on one set of rows.

    ``X`` given to :meth:`fit`/:meth:`transform` carries NaN at missing cells.
    Only columns flagged in ``scale_mask`` are standardized; binary symptom
    columns pass through unchanged.
    """

    names: tuple
    scale_mask: np.ndarray
    medians: np.ndarray = None
    scaler: StandardizationParams = None

    def fit(self, X):
        X = np.asarray(X, dtype=float)
        medians = np.empty(X.shape[1])
        for j in range(X.shape[1]):
            present = X[~np.isnan(X[:, j]), j]
            if present.size == 0:
                raise ImputationError(f"column {self.names[j]!r} has no non-missing values in the fitting rows")
            medians[j] = np.median(present)
        self.medians = medians
        filled = self._impute(X)
        mean = np.where(self.scale_mask, filled.mean(axis=0), 0.0)
        std = np.where(self.scale_mask, filled.std(axis=0), 1.0)
        self.scaler = StandardizationParams(tuple(self.names), mean, std)
        return self

    def _impute(self, X):
        return np.where(np.isnan(X), self.medians, X)

    def transform(self, X):
        if self.medians is None:
            raise ContractError("FeaturePipeline used before fit")
        X = np.asarray(X, dtype=float)
        if X.shape[1] != len(self.names):
            raise ContractError(f"expected {len(self.names)} columns, got {X.shape[1]}")
        return self.scaler.transform(self._impute(X))

    def fit_transform(self, X):
        return self.fit(X).transform(X)


def masked_feature_matrix(dataset, names=None):
    """Feature matrix with every missing marker (NaN or flagged zero) set to NaN."""
    names = dataset.feature_names if names is None else list(names)
    X = dataset.feature_matrix(names)
    for j, name in enumerate(names):
        X[dataset.missing_mask(name), j] = np.nan
    return X


def feature_pipeline_for(dataset, names=None):
    names = dataset.feature_names if names is None else list(names)
    numeric = set(numeric_features(dataset))
    return FeaturePipeline(tuple(names), np.array([n in numeric for n in names]))


@dataclass
class PreprocessReport:
    imputed_counts: dict = field(default_factory=dict)
    removed_row_ids: list = field(default_factory=list)
    removed_outlier_counts: list = field(default_factory=list)
    train_indices: list = field(default_factory=list)
    test_indices: list = field(default_factory=list)
    mode: str = "fold_local"

    def to_dict(self):
        return {
            "mode": self.mode,
            "imputed_counts": {k: int(v) for k, v in self.imputed_counts.items()},
            "removed_row_ids": [int(i) for i in self.removed_row_ids],
            "removed_outlier_counts": [int(c) for c in self.removed_outlier_counts],
            "train_indices": [int(i) for i in self.train_indices],
            "test_indices": [int(i) for i in self.test_indices],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)
