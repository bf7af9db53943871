"""Classifier configurations with fixed default hyperparameters."""

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigError


@dataclass(frozen=True)
class LogRegSpec:
    max_iter: int = 4000
    class_weight: str = "balanced"
    tol: float = 1e-8
    seed: int = 0
    name = "logreg"
    label = "Logistic Regression"

    def __post_init__(self):
        if self.max_iter <= 0:
            raise ConfigError("max_iter must be positive")
        if self.class_weight not in ("balanced", "none"):
            raise ConfigError(f"class_weight must be 'balanced' or 'none', got {self.class_weight!r}")


@dataclass(frozen=True)
class SvmRbfSpec:
    C: float = 1.0
    gamma: object = "scale"
    tol: float = 1e-3
    calibration_folds: int = 3
    max_iter: int | None = None
    seed: int = 0
    name = "svm_rbf"
    label = "SVM-RBF"

    def __post_init__(self):
        if self.C <= 0:
            raise ConfigError("C must be positive")
        if self.gamma != "scale" and not float(self.gamma) > 0:
            raise ConfigError("gamma must be 'scale' or a positive number")


@dataclass(frozen=True)
class RandomForestSpec:
    n_trees: int = 300
    max_features: object = "sqrt"
    max_depth: int | None = None
    seed: int = 0
    name = "random_forest"
    label = "Random Forest"
    bootstrap = True
    split_mode = "best"

    def __post_init__(self):
        if self.n_trees <= 0:
            raise ConfigError("n_trees must be positive")


@dataclass(frozen=True)
class ExtraTreesSpec:
    n_trees: int = 300
    max_features: object = "sqrt"
    max_depth: int | None = None
    seed: int = 0
    name = "extra_trees"
    label = "Extra Trees"
    bootstrap = False
    split_mode = "random"

    def __post_init__(self):
        if self.n_trees <= 0:
            raise ConfigError("n_trees must be positive")


@dataclass(frozen=True)
class GradBoostSpec:
    n_trees: int = 200
    learning_rate: float = 0.1
    max_depth: int = 3
    seed: int = 0
    name = "gradient_boosting"
    label = "Gradient Boosting"

    def __post_init__(self):
        if self.n_trees < 0:
            raise ConfigError("n_trees must be non-negative")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


SPEC_TYPES = {cls.name: cls for cls in (SvmRbfSpec, LogRegSpec, RandomForestSpec, ExtraTreesSpec, GradBoostSpec)}
DEFAULT_MODELS = ("svm_rbf", "logreg", "random_forest", "extra_trees", "gradient_boosting")
TREE_MODELS = ("random_forest", "extra_trees", "gradient_boosting")


def make_spec(name, seed=0, **overrides):
    try:
        cls = SPEC_TYPES[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(SPEC_TYPES)}") from None
    allowed = {f.name for f in fields(cls)}
    unknown = set(overrides) - allowed
    if unknown:
        raise ConfigError(f"unknown hyperparameters for {name}: {sorted(unknown)}")
    return cls(seed=seed, **overrides)


def spec_to_dict(spec):
    return {"variant": spec.name, **asdict(spec)}


def spec_from_dict(d):
    d = dict(d)
    return make_spec(d.pop("variant"), **d)
