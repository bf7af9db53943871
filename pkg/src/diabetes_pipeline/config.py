"""JSON pipeline configuration.

Relative paths are resolved against the directory holding the config file.
Schemas may be given inline (a list of column objects) or as a path.
"""

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataio import load_schema, validate_schema
from .errors import ConfigError, PipelineError
from .models.specs import DEFAULT_MODELS, SPEC_TYPES, TREE_MODELS, make_spec

STAGE1_DEFAULTS = {
    "data": None,
    "schema": None,
    "preprocessing": "fold_local",
    "test_fraction": 0.2,
    "cv_folds": 5,
    "models": list(DEFAULT_MODELS),
    "hyperparameters": {},
    "stacking": {"enabled": True, "base_models": list(DEFAULT_MODELS), "n_folds": 5},
    "designated_model": "svm_rbf",
    "shap_models": 3,
}
STAGE2_DEFAULTS = {
    "enabled": True,
    "features": ["Glucose", "Insulin", "Age"],
    "k_min": 2,
    "k_max": 8,
    "margin": 0.005,
    "n_init": 10,
    "max_iter": 300,
    "tol": 1e-4,
    "insulin": "Insulin",
    "age": "Age",
}
STAGE3_DEFAULTS = {
    "data": None,
    "schema": None,
    "metric": "GlycemicControl",
    "cognitive": "CogFunc",
    "normality": None,
    "holm_family": ["H1", "H2"],
    "alpha": 0.05,
    "tie_correction": True,
}
TOP_KEYS = {"seed", "output_dir", "stage1", "stage2", "stage3"}


def _merge(defaults, given, section):
    if given is None:
        return None
    if not isinstance(given, dict):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(copy.deepcopy(given))
    return out


@dataclass
class PipelineConfig:
    seed: int
    output_dir: str = "out"
    stage1: dict = None
    stage2: dict = None
    stage3: dict = None
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, d, base_dir=None):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
        if "seed" not in d or isinstance(d["seed"], bool) or not isinstance(d["seed"], int):
            raise ConfigError("config needs an integer 'seed'")
        cfg = cls(
            seed=d["seed"],
            output_dir=d.get("output_dir", "out"),
            stage1=_merge(STAGE1_DEFAULTS, d.get("stage1"), "stage1"),
            stage2=_merge(STAGE2_DEFAULTS, d.get("stage2", {}) if d.get("stage1") else d.get("stage2"),
                          "stage2"),
            stage3=_merge(STAGE3_DEFAULTS, d.get("stage3"), "stage3"),
            base_dir=Path(base_dir) if base_dir is not None else Path.cwd(),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent)

    def resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def schema(self, stage):
        section = getattr(self, stage)
        raw = section["schema"]
        if isinstance(raw, str):
            raw = self.resolve(raw)
        try:
            schema = load_schema(raw)
        except PipelineError as exc:
            raise ConfigError(f"{stage} schema: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"{stage} schema unreadable: {exc}") from exc
        return schema

    def validate(self):
        if self.stage1 is None and self.stage3 is None:
            raise ConfigError("config defines neither stage1 nor stage3")
        if self.stage1 is not None:
            s1 = self.stage1
            for key in ("data", "schema"):
                if not s1.get(key):
                    raise ConfigError(f"stage1.{key} is required")
            if s1["preprocessing"] not in ("fold_local", "global"):
                raise ConfigError("stage1.preprocessing must be 'fold_local' or 'global'")
            if not 0 < float(s1["test_fraction"]) < 1:
                raise ConfigError("stage1.test_fraction must lie in (0, 1)")
            if int(s1["cv_folds"]) < 2:
                raise ConfigError("stage1.cv_folds must be >= 2")
            for name in list(s1["models"]) + list(s1["stacking"].get("base_models", [])):
                if name not in SPEC_TYPES:
                    raise ConfigError(f"unknown model {name!r}")
            if s1["designated_model"] not in SPEC_TYPES:
                raise ConfigError(f"unknown designated model {s1['designated_model']!r}")
            for name in s1["hyperparameters"]:
                make_spec(name, self.seed, **s1["hyperparameters"][name])
            schema = self.schema("stage1")
            try:
                validate_schema(schema, "stage1")
            except PipelineError as exc:
                raise ConfigError(str(exc)) from exc
            names = {c.name for c in schema}
            if self.stage2 is not None and self.stage2["enabled"]:
                s2 = self.stage2
                missing = [f for f in s2["features"] if f not in names]
                if missing:
                    raise ConfigError(f"stage2 features not in the stage1 schema: {missing}")
                if not 2 <= int(s2["k_min"]) <= int(s2["k_max"]):
                    raise ConfigError("stage2 needs 2 <= k_min <= k_max")
                if float(s2["margin"]) < 0:
                    raise ConfigError("stage2.margin must be non-negative")
        if self.stage3 is not None:
            s3 = self.stage3
            for key in ("data", "schema"):
                if not s3.get(key):
                    raise ConfigError(f"stage3.{key} is required")
            schema = self.schema("stage3")
            try:
                validate_schema(schema, "stage3")
            except PipelineError as exc:
                raise ConfigError(str(exc)) from exc
            names = {c.name for c in schema}
            cols = [s3["metric"], s3["cognitive"], *(s3["normality"] or [])]
            missing = [c for c in cols if c not in names]
            if missing:
                raise ConfigError(f"stage3 columns not in the stage3 schema: {missing}")
            bad = set(s3["holm_family"]) - {"H1", "H2"}
            if bad:
                raise ConfigError(f"stage3.holm_family may only name H1/H2, got {sorted(bad)}")

    def model_spec(self, name):
        return make_spec(name, seed=self.seed, **self.stage1["hyperparameters"].get(name, {}))

    def tree_models(self):
        return [m for m in self.stage1["models"] if m in TREE_MODELS]

    def to_dict(self):
        return {
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "stage1": self.stage1,
            "stage2": self.stage2,
            "stage3": self.stage3,
        }
