"""Native classifiers: logistic regression, RBF SVM, forests and gradient boosting."""

import json

from ..errors import ContractError
from .base import FORMAT_VERSION, TrainedClassifier, sigmoid
from .boosting import BoostedModel, fit_gradient_boosting
from .forest import ForestModel, fit_extra_trees, fit_random_forest
from .logreg import LogisticModel, fit_logreg
from .specs import (
    DEFAULT_MODELS,
    SPEC_TYPES,
    TREE_MODELS,
    ExtraTreesSpec,
    GradBoostSpec,
    LogRegSpec,
    RandomForestSpec,
    SvmRbfSpec,
    make_spec,
    spec_from_dict,
    spec_to_dict,
)
from .svm import SvmModel, fit_svm_smo
from .tree import Tree, fit_cart

__all__ = [
    "BoostedModel", "DEFAULT_MODELS", "ExtraTreesSpec", "ForestModel", "GradBoostSpec",
    "LogRegSpec", "LogisticModel", "RandomForestSpec", "SPEC_TYPES", "SvmModel", "SvmRbfSpec",
    "TREE_MODELS", "Tree", "TrainedClassifier", "fit_cart", "fit_extra_trees",
    "fit_gradient_boosting", "fit_logreg", "fit_model", "fit_random_forest", "fit_svm_smo",
    "load_model", "make_spec", "model_from_dict", "save_model", "sigmoid", "spec_from_dict",
    "spec_to_dict",
]


def fit_model(spec, X, y, feature_names=None, n_jobs=None):
    """Dispatch on the spec type."""
    if isinstance(spec, LogRegSpec):
        return fit_logreg(X, y, spec, feature_names)
    if isinstance(spec, SvmRbfSpec):
        return fit_svm_smo(X, y, spec, feature_names)
    if isinstance(spec, RandomForestSpec):
        return fit_random_forest(X, y, spec, feature_names, n_jobs)
    if isinstance(spec, ExtraTreesSpec):
        return fit_extra_trees(X, y, spec, feature_names, n_jobs)
    if isinstance(spec, GradBoostSpec):
        return fit_gradient_boosting(X, y, spec, feature_names)
    raise ContractError(f"no fitter for {type(spec).__name__}")


_LOADERS = {
    "logreg": LogisticModel.from_dict,
    "svm_rbf": SvmModel.from_dict,
    "random_forest": ForestModel.from_dict,
    "extra_trees": ForestModel.from_dict,
    "gradient_boosting": BoostedModel.from_dict,
}


def model_from_dict(d):
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ContractError(f"unsupported model format version {version!r}")
    if d.get("variant") == "stacking":
        from ..ensemble import StackingModel

        return StackingModel.from_dict(d)
    try:
        loader = _LOADERS[d["variant"]]
    except KeyError:
        raise ContractError(f"unknown model variant {d.get('variant')!r}") from None
    return loader(d)


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
