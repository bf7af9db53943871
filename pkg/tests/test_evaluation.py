import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diabetes_pipeline.errors import ContractError, DegenerateDataError
from diabetes_pipeline.evaluation import (
    ConfusionMatrix,
    CVSummary,
    confusion,
    cross_validate,
    evaluate_scores,
    folds_csv,
    metrics,
    roc_auc,
    roc_curve,
    roc_points_csv,
    table_csv,
    threshold_predictions,
)
from diabetes_pipeline.models import LogRegSpec
from diabetes_pipeline.models.base import TrainedClassifier


def _pair_auc(y, s):
    pos, neg = s[y == 1], s[y == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (len(pos) * len(neg))


labelled = st.integers(2, 40).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda v: 0 < sum(v) < len(v)),
        st.lists(st.integers(0, 5).map(lambda k: k / 5), min_size=n, max_size=n),
    )
)


@given(labelled)
@settings(max_examples=200, deadline=None)
def test_auc_equals_pair_counting(data):
    y, s = map(np.array, data)
    assert roc_auc(y, s) == pytest.approx(_pair_auc(y, s), abs=1e-12)


@given(labelled)
@settings(max_examples=100, deadline=None)
def test_auc_invariances(data):
    y, s = map(np.array, data)
    auc = roc_auc(y, s)
    assert roc_auc(y, np.exp(3 * s) - 7) == pytest.approx(auc, abs=1e-12)
    assert roc_auc(y, -s) == pytest.approx(1 - auc, abs=1e-12)


def test_auc_extremes_and_curve_shape():
    y = np.array([0, 0, 1, 1])
    assert roc_auc(y, np.array([0.1, 0.2, 0.8, 0.9])) == 1.0
    assert roc_auc(y, np.array([0.5, 0.5, 0.5, 0.5])) == 0.5
    pts = roc_curve(y, np.array([0.1, 0.4, 0.35, 0.8]))
    assert pts[0] == (0.0, 0.0, float("inf"))
    assert pts[-1][:2] == (1.0, 1.0)
    fpr = [p[0] for p in pts]
    tpr = [p[1] for p in pts]
    assert fpr == sorted(fpr) and tpr == sorted(tpr)
    assert roc_points_csv(pts).splitlines()[0] == "fpr,tpr,threshold"
    with pytest.raises(DegenerateDataError):
        roc_auc(np.ones(4, int), np.arange(4.0))


def test_confusion_and_threshold():
    assert threshold_predictions([0.5, 0.5000001, 0.2]).tolist() == [0, 1, 0]
    cm = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert cm == ConfusionMatrix(tn=1, fp=1, fn=1, tp=2)
    with pytest.raises(ContractError):
        confusion([1, 0], [1])
    with pytest.raises(ContractError):
        confusion([2, 0], [1, 0])
    with pytest.raises(ContractError):
        ConfusionMatrix(-1, 0, 0, 0)


@given(st.tuples(*(st.integers(0, 50),) * 4).filter(lambda t: min(t[0] + t[1], t[2] + t[3]) > 0))
def test_metric_identities(counts):
    tn, fp, fn, tp = counts
    m = metrics(ConfusionMatrix(tn, fp, fn, tp))
    assert m.accuracy == pytest.approx((tn + tp) / (tn + fp + fn + tp))
    assert m.balanced_accuracy == pytest.approx((m.recall + m.specificity) / 2)
    if m.precision + m.recall > 0:
        assert m.f1 == pytest.approx(2 * m.precision * m.recall / (m.precision + m.recall))
        assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12
    for v in m.as_tuple()[:6]:
        assert 0.0 <= v <= 1.0


def test_degenerate_metrics_flagged():
    m = metrics(ConfusionMatrix(tn=5, fp=0, fn=3, tp=0))
    assert m.precision == 0.0 and m.f1 == 0.0
    assert "precision" in m.degenerate and "f1" in m.degenerate
    _, ms = evaluate_scores(np.zeros(4, int), np.array([0.1, 0.2, 0.3, 0.9]))
    assert "roc_auc" in ms.degenerate


class _Constant(TrainedClassifier):
    variant = "constant"

    def __init__(self, p, n_features):
        super().__init__(n_features)
        self.p = p

    def positive_proba(self, X):
        return np.full(len(self._check(X)), self.p)


def test_cv_dummy_model_gives_chance_auc():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(100, 2))
    y = (rng.random(100) < 0.3).astype(int)

    def fit(Xtr, ytr, names):
        return _Constant(ytr.mean(), Xtr.shape[1])

    cv = cross_validate(X, y, fit, k=5, seed=1)
    assert cv.k == 5
    assert sum(cv.fold_sizes) == 100
    assert all(m.roc_auc == 0.5 for m in cv.folds)
    assert all(m.recall == 0.0 for m in cv.folds)


def test_cv_deterministic_and_workers_agree():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(90, 3))
    y = (X[:, 0] + rng.normal(size=90) > 0.4).astype(int)
    X[::7, 1] = np.nan
    a = cross_validate(X, y, LogRegSpec(), k=5, seed=3, n_jobs=1)
    b = cross_validate(X, y, LogRegSpec(), k=5, seed=3, n_jobs=2)
    assert [m.as_tuple() for m in a.folds] == [m.as_tuple() for m in b.folds]
    assert a.mean("roc_auc") > 0.7
    with pytest.raises(ContractError):
        cross_validate(X, y, LogRegSpec(), mode="global")
    with pytest.raises(ContractError):
        cross_validate(X, y, LogRegSpec(), mode="sloppy")


def test_summary_tables():
    folds = [metrics(ConfusionMatrix(5, 1, 2, 4)), metrics(ConfusionMatrix(4, 2, 1, 5))]
    s = CVSummary("logreg", folds, label="Logistic Regression", fold_sizes=[12, 12])
    assert s.std("accuracy") == pytest.approx(np.std([9 / 12, 9 / 12], ddof=1))
    assert s.std("recall") == pytest.approx(np.std([4 / 6, 5 / 6], ddof=1))
    table = table_csv([s]).splitlines()
    assert table[0] == "model,accuracy,balanced_accuracy,precision,recall,f1,roc_auc"
    assert table[1].startswith("Logistic Regression,0.750 ± 0.000")
    assert len(folds_csv([s]).splitlines()) == 3
