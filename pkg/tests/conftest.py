import json
import os
from pathlib import Path

import numpy as np
import pytest

from diabetes_pipeline.dataio import ColumnSchema, load_csv
from diabetes_pipeline.demo_data import default_keel_path, keel_pima_to_csv, write_cohort_csv
from diabetes_pipeline.parallel import WORKERS_ENV

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

_ACCEPTANCE = []


def record_acceptance(number, title, passed, detail=""):
    _ACCEPTANCE.append((number, title, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"AC{number:<3} {status}  {title}  {detail}")


@pytest.fixture(autouse=True)
def _restore_workers_env():
    # the CLI's --workers flag writes the variable for the process
    before = os.environ.get(WORKERS_ENV)
    yield
    if before is None:
        os.environ.pop(WORKERS_ENV, None)
    else:
        os.environ[WORKERS_ENV] = before


@pytest.fixture
def acceptance():
    return record_acceptance


def pima_schema():
    with open(CONFIGS / "pima_schema.json", encoding="utf-8") as fh:
        return [ColumnSchema.from_dict(d) for d in json.load(fh)]


@pytest.fixture(scope="session")
def pima_csv(tmp_path_factory):
    """Public Pima data as CSV: $PIMA_CSV, else the KEEL copy shipped with imbalanced-databases."""
    given = os.environ.get("PIMA_CSV")
    if given:
        if not Path(given).exists():
            pytest.skip(f"PIMA_CSV={given} does not exist")
        return Path(given)
    src = default_keel_path()
    if src is None:
        pytest.skip("no Pima source available (set PIMA_CSV or install imbalanced-databases)")
    dst = tmp_path_factory.mktemp("pima") / "pima.csv"
    keel_pima_to_csv(src, dst)
    return dst


@pytest.fixture(scope="session")
def pima(pima_csv):
    return load_csv(pima_csv, pima_schema())


@pytest.fixture(scope="session")
def cohort_csv(tmp_path_factory):
    dst = tmp_path_factory.mktemp("cohort") / "cognitive.csv"
    write_cohort_csv(dst, seed=0)
    return dst


def write_config(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


@pytest.fixture
def synthetic_stage1(tmp_path):
    """Small two-feature labelled table plus schema file, quick to run end to end."""
    rng = np.random.default_rng(7)
    n = 120
    y = (rng.random(n) < 0.35).astype(int)
    glucose = np.round(100 + 25 * y + rng.normal(0, 12, n), 1)
    insulin = np.round(np.abs(80 + 40 * y + rng.normal(0, 20, n)), 1)
    age = np.round(30 + 10 * y + rng.normal(0, 6, n), 0)
    glucose[::17] = 0
    lines = ["Glucose,Insulin,Age,Outcome"]
    lines += [f"{g},{i},{a},{t}" for g, i, a, t in zip(glucose, insulin, age, y)]
    data = tmp_path / "syn.csv"
    data.write_text("\n".join(lines) + "\n", encoding="utf-8")
    schema = [
        {"name": "Glucose", "kind": "numeric", "role": "feature", "zero_is_missing": True},
        {"name": "Insulin", "kind": "numeric", "role": "feature", "zero_is_missing": False},
        {"name": "Age", "kind": "numeric", "role": "feature", "zero_is_missing": False},
        {"name": "Outcome", "kind": "numeric", "role": "target", "zero_is_missing": False},
    ]
    return data, schema
