"""Stacking: a balanced logistic meta-learner over out-of-fold base probabilities."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .folds import stratified_folds
from .models import DEFAULT_MODELS, fit_logreg, fit_model, make_spec, model_from_dict, spec_to_dict
from .models.base import TrainedClassifier
from .models.specs import SPEC_TYPES, LogRegSpec
from .parallel import parallel_map


@dataclass(frozen=True)
class StackingSpec:
    base_models: tuple = DEFAULT_MODELS
    n_folds: int = 5
    seed: int = 0
    base_overrides: dict = field(default_factory=dict, hash=False, compare=False)
    name = "stacking"
    label = "Stacking"

    def __post_init__(self):
        if self.n_folds < 2:
            raise ContractError("stacking needs at least 2 folds")
        if not self.base_models:
            raise ContractError("stacking needs at least one base model")

    def base_specs(self):
        specs = []
        for b in self.base_models:
            if isinstance(b, tuple(SPEC_TYPES.values())):
                specs.append(b)
            else:
                specs.append(make_spec(b, seed=self.seed, **self.base_overrides.get(b, {})))
        return specs


class StackingModel(TrainedClassifier):
    variant = "stacking"

    def __init__(self, base_specs, base_models, meta_model, fold_plan, meta_features,
                 training_sets, n_features, **kwargs):
        super().__init__(n_features, **kwargs)
        self.base_specs = list(base_specs)
        self.base_models = list(base_models)
        self.meta_model = meta_model
        self.fold_plan = np.asarray(fold_plan)
        self.meta_features = np.asarray(meta_features)
        # training_sets[f] = rows the fold-f base fits saw
        self.training_sets = [np.asarray(t) for t in training_sets]

    def base_probabilities(self, X):
        X = self._check(X)
        return np.column_stack([m.predict_proba(X)[:, 1] for m in self.base_models])

    def decision_score(self, X):
        return self.meta_model.decision_score(self.base_probabilities(X))

    def positive_proba(self, X):
        return self.meta_model.positive_proba(self.base_probabilities(X))

    def to_dict(self):
        return {
            **self._header(),
            "base_specs": [spec_to_dict(s) for s in self.base_specs],
            "base_models": [m.to_dict() for m in self.base_models],
            "meta_model": self.meta_model.to_dict(),
            "fold_plan": self.fold_plan.tolist(),
            "meta_features": self.meta_features.tolist(),
            "training_sets": [t.tolist() for t in self.training_sets],
        }

    @classmethod
    def from_dict(cls, d):
        from .models import spec_from_dict

        return cls([spec_from_dict(s) for s in d["base_specs"]],
                   [model_from_dict(m) for m in d["base_models"]],
                   model_from_dict(d["meta_model"]), d["fold_plan"], d["meta_features"],
                   d["training_sets"], d["n_features"], feature_names=d.get("feature_names"),
                   meta=d.get("meta"))


def _oof_job(args):
    X, y, spec, train, test, names = args
    model = fit_model(spec, X[train], y[train], feature_names=names, n_jobs=1)
    return model.predict_proba(X[test])[:, 1]


def _refit_job(args):
    X, y, spec, names = args
    return fit_model(spec, X, y, feature_names=names, n_jobs=1)


def fit_stacking(X, y, spec=None, feature_names=None, n_jobs=None, in_fold=False):
    """Fit base models fold-wise for meta-features, then the meta-learner, then refit bases.

    ``in_fold=True`` deliberately predicts each fold with models that saw it;
    it exists only to demonstrate what leakage does and fails the leakage check.
    """
    spec = spec or StackingSpec()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    n = len(y)
    specs = spec.base_specs()
    fold = stratified_folds(y, spec.n_folds, spec.seed)
    plan = []
    for f in range(spec.n_folds):
        test = np.flatnonzero(fold == f)
        train = np.arange(n) if in_fold else np.flatnonzero(fold != f)
        plan.append((train, test))
    jobs = [(X, y, s, tr, te, feature_names) for s in specs for tr, te in plan]
    preds = parallel_map(_oof_job, jobs, n_jobs)
    meta = np.empty((n, len(specs)))
    for b in range(len(specs)):
        for f, (_, test) in enumerate(plan):
            meta[test, b] = preds[b * spec.n_folds + f]
    meta_model = fit_logreg(meta, y, LogRegSpec(seed=spec.seed),
                            feature_names=[s.name for s in specs])
    bases = parallel_map(_refit_job, [(X, y, s, feature_names) for s in specs], n_jobs)
    return StackingModel(specs, bases, meta_model, fold, meta, [tr for tr, _ in plan], X.shape[1],
                         feature_names=feature_names,
                         meta={"seed": spec.seed, "n_folds": spec.n_folds})


def predict_stacking(model, X):
    return model.predict_proba(X)


def leakage_violations(model):
    """Rows whose meta-features came from a base fit that had seen them."""
    bad = []
    for i, f in enumerate(model.fold_plan):
        train = model.training_sets[f]
        pos = np.searchsorted(train, i)
        if pos < len(train) and train[pos] == i:
            bad.append(i)
    return bad


def check_no_leakage(model):
    bad = leakage_violations(model)
    if bad:
        raise ContractError(f"{len(bad)} meta-feature rows leak training data, first at row {bad[0]}")
    return True
