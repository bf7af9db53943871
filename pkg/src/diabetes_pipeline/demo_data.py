"""Local demo inputs: a KEEL-format Pima file converted to CSV, and a synthetic
cognitive cohort with the Stage-3 column layout.

Usage: ``python -m diabetes_pipeline.demo_data OUT_DIR [--keel PATH]``
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from .errors import DataError

PIMA_COLUMNS = ["Pregnancies", "Glucose", "BloodPressure", "SkinThickness", "Insulin", "BMI",
                "DiabetesPedigreeFunction", "Age", "Outcome"]
COHORT_GROUPS = (("Nondemented", 190), ("Demented", 146), ("Converted", 37))


def default_keel_path():
    try:
        import imbalanced_databases
    except ImportError:
        return None
    path = Path(imbalanced_databases.__file__).parent / "data" / "pima" / "pima.dat"
    return path if path.exists() else None


def keel_pima_to_csv(src, dst):
    """Convert the KEEL ``pima.dat`` (class positive/negative) to a UCI-named CSV."""
    rows = []
    in_data = False
    with open(src, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.lower().startswith("@data"):
                in_data = True
                continue
            if line.startswith("@") or not in_data:
                continue
            cells = [c.strip() for c in line.split(",")]
            label = {"positive": "1", "negative": "0"}.get(cells[-1].lower())
            if label is None or len(cells) != len(PIMA_COLUMNS):
                raise DataError(f"unexpected KEEL row: {line!r}")
            rows.append([_plain(c) for c in cells[:-1]] + [label])
    with open(dst, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PIMA_COLUMNS)
        w.writerows(rows)
    return len(rows)


def _plain(cell):
    v = float(cell)
    return str(int(v)) if v.is_integer() else cell


def synthetic_cohort(seed=0, rho_s=0.208, groups=COHORT_GROUPS):
    """Rows (subject, group, glycemic, cogfunc, mmse) with a planted Spearman rho.

    A Gaussian copula with Pearson r = 2 sin(pi rho_s / 6) gives the requested
    population Spearman correlation. Group labels are independent of the data.
    """
    rng = np.random.default_rng(seed)
    n = sum(c for _, c in groups)
    r = 2.0 * math.sin(math.pi * rho_s / 6.0)
    z1 = rng.standard_normal(n)
    z2 = r * z1 + math.sqrt(1.0 - r * r) * rng.standard_normal(n)
    glycemic = np.round(50.0 + 10.0 * z1, 3)
    cog = np.round(100.0 + 15.0 * z2, 3)
    mmse = 30 - np.minimum(rng.poisson(2.5, n), 20)
    labels = np.concatenate([[g] * c for g, c in groups])
    labels = labels[rng.permutation(n)]
    return [(f"S{i:04d}", labels[i], glycemic[i], cog[i], int(mmse[i])) for i in range(n)]


def write_cohort_csv(dst, seed=0, rho_s=0.208):
    with open(dst, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["Subject", "Group", "GlycemicControl", "CogFunc", "MMSE"])
        for row in synthetic_cohort(seed, rho_s):
            w.writerow([row[0], row[1], repr(float(row[2])), repr(float(row[3])), row[4]])


def main(argv=None):
    parser = argparse.ArgumentParser(description="write demo input CSVs")
    parser.add_argument("out_dir")
    parser.add_argument("--keel", help="path to KEEL pima.dat")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    src = Path(args.keel) if args.keel else default_keel_path()
    if src is None:
        parser.error("no KEEL pima.dat found; pass --keel")
    n = keel_pima_to_csv(src, out / "pima.csv")
    write_cohort_csv(out / "cognitive.csv", seed=args.seed)
    print(f"wrote {n} Pima rows and a synthetic cohort to {out}")


if __name__ == "__main__":
    main()
