"""Binary metrics, tie-aware ROC analysis and the stratified k-fold harness.

Precision, recall and F1 follow the positive-class (label 1) convention.
Count metrics use the threshold ``p > 0.5`` on the positive-class probability.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateDataError
from .folds import fold_indices, stratified_folds
from .parallel import parallel_map
from .preprocess import FeaturePipeline

THRESHOLD = 0.5
METRIC_NAMES = ("accuracy", "balanced_accuracy", "precision", "recall", "f1", "specificity", "roc_auc")
TABLE_METRICS = ("accuracy", "balanced_accuracy", "precision", "recall", "f1", "roc_auc")


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    def __post_init__(self):
        if min(self.tn, self.fp, self.fn, self.tp) < 0:
            raise ContractError("confusion counts must be non-negative")

    @property
    def total(self):
        return self.tn + self.fp + self.fn + self.tp

    def to_dict(self):
        return {"tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp}


def threshold_predictions(proba, threshold=THRESHOLD):
    return (np.asarray(proba, dtype=float) > threshold).astype(int)


def _check_pair(y_true, other):
    y_true = np.asarray(y_true)
    other = np.asarray(other)
    if y_true.shape != other.shape or y_true.ndim != 1:
        raise ContractError(f"length mismatch: {y_true.shape} vs {other.shape}")
    if not np.all(np.isin(y_true, (0, 1))):
        raise ContractError("labels must be 0/1")
    return y_true.astype(int), other


def confusion(y_true, y_pred):
    y_true, y_pred = _check_pair(y_true, y_pred)
    if not np.all(np.isin(y_pred, (0, 1))):
        raise ContractError("predictions must be 0/1")
    y_pred = y_pred.astype(int)
    return ConfusionMatrix(
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
    )


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    balanced_accuracy: float
    precision: float
    recall: float
    f1: float
    specificity: float
    roc_auc: float = float("nan")
    degenerate: tuple = ()

    def as_tuple(self, names=METRIC_NAMES):
        return tuple(getattr(self, n) for n in names)

    def to_dict(self):
        d = {n: getattr(self, n) for n in METRIC_NAMES}
        d["degenerate"] = list(self.degenerate)
        return d


def _ratio(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def metrics(cm, y_true=None, scores=None):
    """Metric set from counts; ROC-AUC needs the labels and scores as well.

    A zero denominator yields 0 and the metric name is listed in ``degenerate``.
    """
    flags = []
    accuracy = _ratio(cm.tn + cm.tp, cm.total, "accuracy", flags)
    precision = _ratio(cm.tp, cm.tp + cm.fp, "precision", flags)
    recall = _ratio(cm.tp, cm.tp + cm.fn, "recall", flags)
    specificity = _ratio(cm.tn, cm.tn + cm.fp, "specificity", flags)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", flags)
    auc = float("nan")
    if scores is not None:
        try:
            auc = roc_auc(y_true, scores)
        except DegenerateDataError:
            flags.append("roc_auc")
    return MetricSet(accuracy, (recall + specificity) / 2.0, precision, recall, f1, specificity,
                     auc, tuple(flags))


def evaluate_scores(y_true, proba, threshold=THRESHOLD):
    """Confusion matrix and metric set for positive-class probabilities."""
    cm = confusion(y_true, threshold_predictions(proba, threshold))
    return cm, metrics(cm, y_true, proba)


def roc_curve(y_true, scores):
    """ROC points (fpr, tpr, threshold), starting at (0, 0, inf).

    Tied scores move the curve in one diagonal step, so trapezoidal area
    counts tied positive/negative pairs as one half.
    """
    y_true, scores = _check_pair(y_true, scores)
    scores = scores.astype(float)
    n_pos = int(y_true.sum())
    n_neg = len(y_true) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateDataError("ROC-AUC is undefined when only one class is present")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = y_true[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    fpr = np.r_[0.0, fps / n_neg]
    tpr = np.r_[0.0, tps / n_pos]
    thr = np.r_[np.inf, s[last]]
    return list(zip(fpr.tolist(), tpr.tolist(), thr.tolist()))


def roc_auc(y_true, scores):
    pts = np.asarray(roc_curve(y_true, scores))
    fpr, tpr = pts[:, 0], pts[:, 1]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc_points_csv(points):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fpr", "tpr", "threshold"])
    for fpr, tpr, thr in points:
        w.writerow([repr(fpr), repr(tpr), repr(thr)])
    return buf.getvalue()


@dataclass
class CVSummary:
    model: str
    folds: list
    label: str = None
    fold_sizes: list = field(default_factory=list)

    def values(self, name):
        return np.array([getattr(m, name) for m in self.folds], dtype=float)

    def mean(self, name):
        return float(np.mean(self.values(name)))

    def std(self, name):
        v = self.values(name)
        return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0

    @property
    def k(self):
        return len(self.folds)

    def to_dict(self):
        return {
            "model": self.model,
            "label": self.label or self.model,
            "k": self.k,
            "fold_sizes": list(self.fold_sizes),
            "mean": {n: self.mean(n) for n in METRIC_NAMES},
            "std": {n: self.std(n) for n in METRIC_NAMES},
            "folds": [m.to_dict() for m in self.folds],
        }


def _fmt(mean, std):
    return f"{mean:.3f} ± {std:.3f}"


def table_csv(summaries, names=TABLE_METRICS):
    """One row per model with "mean ± std" cells (sample std across folds)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", *names])
    for s in summaries:
        w.writerow([s.label or s.model, *(_fmt(s.mean(n), s.std(n)) for n in names)])
    return buf.getvalue()


def folds_csv(summaries):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "fold", *METRIC_NAMES])
    for s in summaries:
        for i, m in enumerate(s.folds):
            w.writerow([s.model, i, *(repr(float(v)) for v in m.as_tuple())])
    return buf.getvalue()


def summaries_json(summaries, **kwargs):
    return json.dumps([s.to_dict() for s in summaries], **kwargs)


# --- cross-validation harness -------------------------------------------------


class _SpecFitter:
    def __init__(self, spec):
        self.spec = spec
        self.name = spec.name
        self.label = spec.label

    def __call__(self, X, y, feature_names):
        from .models import fit_model

        return fit_model(self.spec, X, y, feature_names=feature_names, n_jobs=1)


def as_fitter(model):
    """Accept a classifier spec, a stacking spec or a plain callable ``fit(X, y, names)``."""
    from .ensemble import StackingSpec, fit_stacking
    from .models.specs import SPEC_TYPES

    if isinstance(model, tuple(SPEC_TYPES.values())):
        return _SpecFitter(model)
    if isinstance(model, StackingSpec):
        def fit(X, y, names):
            return fit_stacking(X, y, model, feature_names=names, n_jobs=1)

        fit.name, fit.label = model.name, model.label
        return fit
    if callable(model):
        return model
    raise ContractError(f"cannot cross-validate {model!r}")


def _run_fold(args):
    X, y, train, test, fitter, scale_mask, names, fold_local = args
    if fold_local:
        pipe = FeaturePipeline(tuple(names), scale_mask).fit(X[train])
        Xtr, Xte = pipe.transform(X[train]), pipe.transform(X[test])
    else:
        Xtr, Xte = X[train], X[test]
    model = fitter(Xtr, y[train], names)
    proba = model.predict_proba(Xte)[:, 1]
    return evaluate_scores(y[test], proba)[1]


def cross_validate(X, y, model, k=5, seed=0, mode="fold_local", scale_mask=None,
                   feature_names=None, n_jobs=None):
    """Stratified k-fold CV on a feature matrix carrying NaN at missing cells.

    ``fold_local`` refits median imputation and standardization on each
    training portion. ``global`` uses ``X`` as given: the caller has
    already imputed and standardized it globally.
    """
    if mode not in ("fold_local", "global"):
        raise ContractError(f"unknown preprocessing mode {mode!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
    scale_mask = np.ones(X.shape[1], dtype=bool) if scale_mask is None else np.asarray(scale_mask, dtype=bool)
    if mode == "global" and np.isnan(X).any():
        raise ContractError("global mode expects a globally imputed matrix without NaN")
    fitter = as_fitter(model)
    fold = stratified_folds(y, k, seed)
    pairs = fold_indices(fold, k)
    jobs = [(X, y, tr, te, fitter, scale_mask, names, mode == "fold_local") for tr, te in pairs]
    results = parallel_map(_run_fold, jobs, n_jobs)
    return CVSummary(
        model=getattr(fitter, "name", "model"),
        folds=results,
        label=getattr(fitter, "label", None),
        fold_sizes=[len(te) for _, te in pairs],
    )


def stratified_kfold_cv(dataset, model, k=5, seed=0, mode="fold_local", n_jobs=None):
    """Cross-validate ``model`` on a dataset whose missing markers are still in place."""
    from .preprocess import feature_pipeline_for, masked_feature_matrix

    names = dataset.feature_names
    pipe = feature_pipeline_for(dataset, names)
    X = masked_feature_matrix(dataset, names)
    if mode == "global":
        X = pipe.fit_transform(X)
    return cross_validate(X, dataset.target(), model, k=k,
                          seed=seed, mode=mode, scale_mask=pipe.scale_mask, feature_names=names,
                          n_jobs=n_jobs)
