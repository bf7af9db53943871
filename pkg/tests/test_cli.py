import csv
import json

import pytest

from conftest import CONFIGS, write_config
from diabetes_pipeline.cli import main
from diabetes_pipeline.config import PipelineConfig
from diabetes_pipeline.errors import ConfigError
from diabetes_pipeline.pipeline import comparable, load_report

FAST_HYPER = {
    "random_forest": {"n_trees": 10},
    "extra_trees": {"n_trees": 10},
    "gradient_boosting": {"n_trees": 15},
}


def _stage1_config(tmp_path, data, schema, **extra):
    doc = {
        "seed": 3,
        "output_dir": "out",
        "stage1": {"data": str(data), "schema": schema, "hyperparameters": FAST_HYPER,
                   "stacking": {"enabled": True, "base_models": ["logreg", "random_forest"], "n_folds": 3},
                   **extra},
        "stage2": {"features": ["Glucose", "Insulin", "Age"], "n_init": 3},
    }
    return write_config(tmp_path / "cfg.json", doc)


def _cohort_config(tmp_path, cohort):
    doc = {
        "seed": 0,
        "output_dir": "out3",
        "stage3": {"data": str(cohort), "schema": str(CONFIGS / "stage3_schema.json"),
                   "normality": ["MMSE", "CogFunc"]},
    }
    return write_config(tmp_path / "cfg3.json", doc)


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_all_on_synthetic_table(tmp_path, synthetic_stage1, capsys):
    data, schema = synthetic_stage1
    cfg = _stage1_config(tmp_path, data, schema)
    assert main(["all", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    for name in ("stage1_table.csv", "stage1_folds.csv", "stage1_roc.csv", "stage1_shap.csv",
                 "stage1_preprocess.json", "stage2_sweep.csv", "stage2_labels.csv",
                 "stage2_profile.json", "run_report.json"):
        assert (out / name).exists(), name
    table = _rows(out / "stage1_table.csv")
    assert table[0] == ["model", "accuracy", "balanced_accuracy", "precision", "recall", "f1", "roc_auc"]
    assert [r[0] for r in table[1:]] == ["SVM-RBF", "Logistic Regression", "Random Forest",
                                         "Extra Trees", "Gradient Boosting", "Stacking"]
    assert all("±" in cell for r in table[1:] for cell in r[1:])
    sweep = _rows(out / "stage2_sweep.csv")
    assert sweep[0] == ["k", "silhouette", "davies_bouldin", "calinski_harabasz"]
    assert [int(r[0]) for r in sweep[1:]] == list(range(2, 9))
    assert _rows(out / "stage1_shap.csv")[0] == ["instance_id", "feature", "value", "phi"]
    report = load_report(out)
    pre = report["stages"]["stage1"]["preprocess"]
    assert pre["n_train"] + pre["n_test"] == report["stages"]["stage1"]["n_rows_retained"]
    assert report["config"]["seed"] == 3
    assert "Stage 2 k-sweep" in capsys.readouterr().out
    assert main(["report", "--config", str(cfg)]) == 0


def test_seed_override_and_rerun_identical(tmp_path, synthetic_stage1):
    data, schema = synthetic_stage1
    cfg = _stage1_config(tmp_path, data, schema)
    assert main(["stage1", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "9"]) == 0
    assert main(["stage1", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "9",
                 "--workers", "2"]) == 0
    a, b = load_report(tmp_path / "a"), load_report(tmp_path / "b")
    assert a["config"]["seed"] == 9
    assert comparable(a) == comparable(b)


def test_global_mode_runs(tmp_path, synthetic_stage1):
    data, schema = synthetic_stage1
    cfg = _stage1_config(tmp_path, data, schema, preprocessing="global")
    assert main(["stage1", "--config", str(cfg)]) == 0
    assert load_report(tmp_path / "out")["stages"]["stage1"]["preprocess"]["mode"] == "global"


def test_stage3_on_synthetic_cohort(tmp_path, cohort_csv):
    cfg = _cohort_config(tmp_path, cohort_csv)
    assert main(["stage3", "--config", str(cfg)]) == 0
    rows = _rows(tmp_path / "out3" / "stage3_results.csv")
    assert rows[0] == ["hypothesis", "test", "variables", "statistic", "p", "p_adjusted", "decision"]
    assert [r[0] for r in rows[1:]] == ["H1", "H2"]
    h2 = load_report(tmp_path / "out3")["stages"]["stage3"]["hypotheses"]["H2"]
    assert h2["p_adjusted"] >= h2["p_value"]
    assert h2["decision"] in ("Reject", "Fail to reject")
    normal = _rows(tmp_path / "out3" / "stage3_normality.csv")
    assert [r[0] for r in normal[1:]] == ["MMSE", "CogFunc"]


def test_ingest(tmp_path, synthetic_stage1):
    data, schema = synthetic_stage1
    cfg = _stage1_config(tmp_path, data, schema)
    assert main(["ingest", "--config", str(cfg)]) == 0
    doc = json.loads((tmp_path / "out" / "ingest_summary.json").read_text())
    assert doc["stage1"]["columns"]["Glucose"]["missing"] > 0


def test_exit_codes(tmp_path, synthetic_stage1, capsys):
    data, schema = synthetic_stage1
    assert main(["stage1", "--config", str(tmp_path / "nope.json")]) == 2
    bad = write_config(tmp_path / "bad.json", {"seed": "zero", "stage1": {}})
    assert main(["stage1", "--config", str(bad)]) == 2
    missing = _stage1_config(tmp_path, tmp_path / "absent.csv", schema)
    assert main(["stage1", "--config", str(missing)]) == 3
    assert "absent.csv" in capsys.readouterr().err
    assert main(["stage1", "--config", str(missing), "--workers", "0"]) == 2
    assert main(["stage3", "--config", str(missing)]) == 2
    assert main(["report", "--out", str(tmp_path / "empty")]) == 2


def test_malformed_cell_is_data_error(tmp_path, synthetic_stage1, capsys):
    data, schema = synthetic_stage1
    lines = data.read_text().splitlines()
    lines[5] = "abc," + lines[5].split(",", 1)[1]
    data.write_text("\n".join(lines) + "\n")
    cfg = _stage1_config(tmp_path, data, schema)
    assert main(["stage1", "--config", str(cfg)]) == 3
    err = capsys.readouterr().err
    assert "[stage1]" in err and "row 5" in err


def test_all_negative_table_is_stage_error(tmp_path, synthetic_stage1):
    data, schema = synthetic_stage1
    lines = data.read_text().splitlines()
    data.write_text("\n".join([lines[0]] + [ln[: ln.rfind(",")] + ",0" for ln in lines[1:]]) + "\n")
    cfg = _stage1_config(tmp_path, data, schema)
    assert main(["stage2", "--config", str(cfg)]) == 3
    assert main(["stage1", "--config", str(cfg)]) == 3


def test_config_validation(tmp_path, synthetic_stage1):
    data, schema = synthetic_stage1
    base = {"seed": 0, "stage1": {"data": str(data), "schema": schema}}
    PipelineConfig.from_dict(base)
    for patch in (
        {"stage1": {**base["stage1"], "models": ["knn"]}},
        {"stage1": {**base["stage1"], "colour": 1}},
        {"stage1": {**base["stage1"], "test_fraction": 1.5}},
        {"stage2": {"features": ["Glucose", "BMI"]}},
        {"stage2": {"k_min": 1}},
        {"extra": 1},
        {"seed": True},
    ):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({**base, **patch})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"seed": 0})
