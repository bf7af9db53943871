import numpy as np
import pytest

from diabetes_pipeline.ensemble import (
    StackingSpec,
    check_no_leakage,
    fit_stacking,
    leakage_violations,
    predict_stacking,
)
from diabetes_pipeline.errors import ContractError
from diabetes_pipeline.evaluation import roc_auc
from diabetes_pipeline.models import (
    GradBoostSpec,
    LogRegSpec,
    RandomForestSpec,
    fit_model,
    load_model,
    save_model,
)


def _data(n=150, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 4))
    y = (X[:, 0] - 0.7 * X[:, 1] + rng.normal(size=n) > 0.5).astype(int)
    return X, y


FAST = StackingSpec(
    base_models=(LogRegSpec(), RandomForestSpec(n_trees=10), GradBoostSpec(n_trees=15)),
    n_folds=4,
    seed=1,
)


def test_meta_features_are_out_of_fold():
    X, y = _data()
    model = fit_stacking(X, y, FAST)
    assert check_no_leakage(model)
    assert leakage_violations(model) == []
    # every row predicted exactly once, by a fit that excluded it
    for f, train in enumerate(model.training_sets):
        test = np.flatnonzero(model.fold_plan == f)
        assert np.intersect1d(train, test).size == 0
        assert len(train) + len(test) == len(y)


def test_meta_features_match_refit_by_hand():
    X, y = _data(seed=1)
    model = fit_stacking(X, y, FAST)
    spec = FAST.base_specs()[0]
    for f, train in enumerate(model.training_sets):
        test = np.flatnonzero(model.fold_plan == f)
        by_hand = fit_model(spec, X[train], y[train]).positive_proba(X[test])
        assert np.array_equal(model.meta_features[test, 0], by_hand)


def test_in_fold_construction_is_caught():
    X, y = _data(seed=2)
    leaky = fit_stacking(X, y, FAST, in_fold=True)
    assert len(leakage_violations(leaky)) == len(y)
    with pytest.raises(ContractError):
        check_no_leakage(leaky)


def test_leakage_inflates_meta_features():
    # an unbounded forest memorises its training rows, so in-fold meta-features look perfect
    X, y = _data(seed=3)
    spec = StackingSpec(base_models=(RandomForestSpec(n_trees=10),), n_folds=4, seed=0)
    honest = fit_stacking(X, y, spec)
    leaky = fit_stacking(X, y, spec, in_fold=True)
    assert roc_auc(y, leaky.meta_features[:, 0]) > roc_auc(y, honest.meta_features[:, 0]) + 0.05


def test_single_base_preserves_ranking():
    # with one base model the meta-learner is a monotone map of its probability
    X, y = _data(seed=4)
    spec = StackingSpec(base_models=(LogRegSpec(),), n_folds=5, seed=0)
    model = fit_stacking(X, y, spec)
    assert model.meta_model.coef[0] > 0
    base = model.base_models[0].positive_proba(X)
    assert roc_auc(y, model.positive_proba(X)) == pytest.approx(roc_auc(y, base), abs=1e-12)


def test_roundtrip_and_workers(tmp_path):
    X, y = _data(seed=5)
    a = fit_stacking(X, y, FAST, n_jobs=1)
    b = fit_stacking(X, y, FAST, n_jobs=2)
    assert np.array_equal(a.positive_proba(X), b.positive_proba(X))
    save_model(a, tmp_path / "s.json")
    again = load_model(tmp_path / "s.json")
    assert np.array_equal(predict_stacking(again, X), predict_stacking(a, X))
    assert again.base_probabilities(X).shape == (len(X), 3)


def test_spec_validation():
    with pytest.raises(ContractError):
        StackingSpec(n_folds=1)
    with pytest.raises(ContractError):
        StackingSpec(base_models=())
    names = [s.name for s in StackingSpec().base_specs()]
    assert names == ["svm_rbf", "logreg", "random_forest", "extra_trees", "gradient_boosting"]
