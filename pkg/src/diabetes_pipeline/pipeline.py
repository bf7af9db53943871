"""Stage runners behind the CLI. Each returns a JSON-ready report fragment and
writes its CSV artifacts as ``<stage>_<artifact>.csv`` in the output directory."""

import csv
import io
import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import profile_clusters, sweep_k
from .dataio import encode_binary, load_csv, summarize
from .ensemble import StackingSpec
from .errors import DataError, PipelineError, StageError
from .evaluation import (
    cross_validate,
    evaluate_scores,
    folds_csv,
    roc_curve,
    roc_points_csv,
    table_csv,
)
from .explain import consensus_rank, select_strongest_tree_model, top_tree_models, tree_shap
from .models import fit_model
from .preprocess import (
    FeaturePipeline,
    PreprocessReport,
    feature_pipeline_for,
    fit_standardizer_array,
    impute_zero_median,
    iqr_filter,
    masked_feature_matrix,
    stratified_split,
)
from .stats import HypothesisResult, holm_correct, kruskal_wallis, shapiro_wilk, spearman

REPORT_NAME = "run_report.json"


def _write(out_dir, name, text):
    path = Path(out_dir) / name
    path.write_text(text, encoding="utf-8")
    return path.name


def _staged(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError as exc:
        if isinstance(exc, StageError):
            raise
        exc.args = (f"[{stage}] {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise


def load_stage_data(cfg, stage):
    section = getattr(cfg, stage)
    path = cfg.resolve(section["data"])
    if not path.exists():
        raise DataError(f"{stage} data file not found: {path}")
    return encode_binary(load_csv(path, cfg.schema(stage)))


def clean_stage1(dataset):
    """Median-impute (global copy) to locate IQR outliers, then drop those rows.

    Returns the filtered dataset with its missing markers intact, the
    globally imputed filtered dataset, imputation counts and the filter log.
    """
    imputed, counts = impute_zero_median(dataset)
    filtered_imputed, frag = iqr_filter(imputed)
    kept = frag["kept"]
    raw = dataset.take(kept, note="IQR filter (rows located on imputed copy)") if len(frag["removed"]) else dataset
    return raw, filtered_imputed, counts, frag


# --- stage 1 ------------------------------------------------------------------


def run_stage1(cfg, out_dir, n_jobs=None):
    s1 = cfg.stage1
    seed = cfg.seed
    dataset = _staged("stage1", load_stage_data, cfg, "stage1")
    raw, imputed, counts, frag = _staged("stage1", clean_stage1, dataset)
    y = raw.target()
    names = raw.feature_names
    pipe_template = feature_pipeline_for(raw, names)
    scale_mask = pipe_template.scale_mask
    X_masked = masked_feature_matrix(raw, names)
    train, test = _staged("stage1", stratified_split, y, s1["test_fraction"], seed)

    mode = s1["preprocessing"]
    if mode == "global":
        X_all = FeaturePipeline(tuple(names), scale_mask).fit_transform(X_masked)
        X_train, X_test = X_all[train], X_all[test]
    else:
        pipe = FeaturePipeline(tuple(names), scale_mask).fit(X_masked[train])
        X_train, X_test = pipe.transform(X_masked[train]), pipe.transform(X_masked[test])
    cv_input = X_masked[train] if mode == "fold_local" else X_train
    y_train, y_test = y[train], y[test]

    report = PreprocessReport(counts, frag["removed_row_ids"], frag["removed_outlier_counts"],
                              raw.row_ids[train].tolist(), raw.row_ids[test].tolist(), mode)

    summaries = []
    for name in s1["models"]:
        summaries.append(_staged("stage1", cross_validate, cv_input, y_train, cfg.model_spec(name),
                                 k=s1["cv_folds"], seed=seed, mode=mode, scale_mask=scale_mask,
                                 feature_names=names, n_jobs=n_jobs))
    stack_cfg = s1["stacking"]
    if stack_cfg.get("enabled", True):
        base = tuple(cfg.model_spec(b) for b in stack_cfg.get("base_models", s1["models"]))
        spec = StackingSpec(base_models=base, n_folds=int(stack_cfg.get("n_folds", 5)), seed=seed)
        summaries.append(_staged("stage1", cross_validate, cv_input, y_train, spec,
                                 k=s1["cv_folds"], seed=seed, mode=mode, scale_mask=scale_mask,
                                 feature_names=names, n_jobs=n_jobs))

    # held-out evaluation of the designated model
    designated = s1["designated_model"]
    model = _staged("stage1", fit_model, cfg.model_spec(designated), X_train, y_train, names, n_jobs)
    proba = model.predict_proba(X_test)[:, 1]
    cm, test_metrics = evaluate_scores(y_test, proba)
    roc = roc_curve(y_test, proba)

    # SHAP on the strongest tree models, test-set instances
    shap_doc = None
    tree_summaries = [s for s in summaries if s.model in cfg.tree_models()]
    artifacts = {}
    if tree_summaries:
        strongest = select_strongest_tree_model(tree_summaries)
        chosen = top_tree_models(tree_summaries, int(s1["shap_models"]))
        attributions = []
        for name in chosen:
            m = model if name == designated else fit_model(cfg.model_spec(name), X_train, y_train, names, n_jobs)
            attributions.append(tree_shap(m, X_test, names))
        consensus = consensus_rank(attributions)
        best = attributions[chosen.index(strongest)]
        best.values = imputed.feature_matrix(names)[test]
        artifacts["shap"] = _write(out_dir, "stage1_shap.csv",
                                   best.to_csv(raw.row_ids[test].tolist()))
        shap_doc = {
            "strongest_model": strongest,
            "models": chosen,
            "strongest": best.summary(),
            "strongest_order": [names[j] for j in np.argsort(-best.mean_abs(), kind="stable")],
            "consensus": consensus.to_dict(),
        }

    artifacts["table"] = _write(out_dir, "stage1_table.csv", table_csv(summaries))
    artifacts["folds"] = _write(out_dir, "stage1_folds.csv", folds_csv(summaries))
    artifacts["roc"] = _write(out_dir, "stage1_roc.csv", roc_points_csv(roc))
    artifacts["preprocess"] = _write(out_dir, "stage1_preprocess.json", report.to_json(indent=1))
    return {
        "n_rows_loaded": dataset.n_rows,
        "n_rows_retained": raw.n_rows,
        "preprocess": {"mode": mode, "imputed_counts": report.to_dict()["imputed_counts"],
                       "n_removed": len(report.removed_row_ids),
                       "n_train": len(train), "n_test": len(test)},
        "cv": [s.to_dict() for s in summaries],
        "test_set": {"model": designated, "confusion": cm.to_dict(), "metrics": test_metrics.to_dict()},
        "shap": shap_doc,
        "artifacts": artifacts,
    }


# --- stage 2 ------------------------------------------------------------------


def run_stage2(cfg, out_dir, n_jobs=None):
    s2 = cfg.stage2
    dataset = _staged("stage2", load_stage_data, cfg, "stage1")
    raw, imputed, _, _ = _staged("stage2", clean_stage1, dataset)
    positives = np.flatnonzero(imputed.target() == 1)
    if positives.size == 0:
        raise StageError("[stage2] no positive (diabetic) rows to cluster")
    feats = list(s2["features"])
    values = imputed.feature_matrix(feats)[positives]
    scaler = fit_standardizer_array(values, feats)
    Z = scaler.transform(values)
    k_range = [k for k in range(int(s2["k_min"]), int(s2["k_max"]) + 1)]
    sweep = _staged("stage2", sweep_k, Z, k_range, cfg.seed, float(s2["margin"]), int(s2["n_init"]),
                    int(s2["max_iter"]), float(s2["tol"]), n_jobs)
    labels = sweep.models[sweep.selected_k].labels
    profile = profile_clusters(values, labels, feats, insulin=s2["insulin"], age=s2["age"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row_id", "cluster"])
    for rid, lab in zip(imputed.row_ids[positives].tolist(), labels.tolist()):
        w.writerow([rid, lab])
    artifacts = {
        "sweep": _write(out_dir, "stage2_sweep.csv", sweep.to_csv()),
        "labels": _write(out_dir, "stage2_labels.csv", buf.getvalue()),
        "profile": _write(out_dir, "stage2_profile.json", json.dumps(profile.to_dict(), indent=1)),
    }
    return {
        "n_positive": int(positives.size),
        "features": feats,
        "standardization": scaler.to_dict(),
        "sweep": sweep.to_dict(),
        "selected_model": sweep.models[sweep.selected_k].to_dict() | {"labels": None},
        "profile": profile.to_dict(),
        "artifacts": artifacts,
    }


# --- stage 3 ------------------------------------------------------------------


def _complete(*cols):
    mask = np.ones(len(cols[0]), dtype=bool)
    for c in cols:
        mask &= ~np.isnan(c)
    return mask


def run_stage3(cfg, out_dir, n_jobs=None):
    s3 = cfg.stage3
    ds = _staged("stage3", load_stage_data, cfg, "stage3")
    group_col = ds.by_role("group_label")[0].name
    groups = ds.column(group_col).astype(str)
    if np.any(np.char.strip(groups) == ""):
        bad = int(np.flatnonzero(np.char.strip(groups) == "")[0]) + 1
        raise StageError(f"[stage3] missing group label in column {group_col!r} at row {bad}")
    metric = np.asarray(ds.column(s3["metric"]), dtype=float)
    metric = np.where(ds.missing_mask(s3["metric"]), np.nan, metric)
    cog = np.asarray(ds.column(s3["cognitive"]), dtype=float)
    cog = np.where(ds.missing_mask(s3["cognitive"]), np.nan, cog)
    alpha = float(s3["alpha"])

    normality = []
    for col in s3["normality"] or [s3["metric"], s3["cognitive"]]:
        v = np.asarray(ds.column(col), dtype=float)
        v = v[~ds.missing_mask(col)]
        r = _staged("stage3", shapiro_wilk, v)
        r.variables = col
        r.alpha = alpha
        normality.append(r)

    ok = _complete(metric)
    levels = sorted(set(groups[ok].tolist()))
    h1 = _staged("stage3", kruskal_wallis, [metric[ok & (groups == g)] for g in levels],
                 tie_correction=bool(s3["tie_correction"]))
    h1.variables = f"{s3['metric']} ~ {group_col}"
    h1.extra["groups"] = levels
    h1.alpha = alpha

    ok2 = _complete(metric, cog)
    corr = _staged("stage3", spearman, metric[ok2], cog[ok2])
    h2 = HypothesisResult(test="Spearman", statistic=corr.rho, statistic_name="rho_s", p_value=corr.p_value,
                          df=corr.n - 2, variables=f"{s3['metric']} x {s3['cognitive']}", alpha=alpha,
                          extra={"n": corr.n, "t_statistic": corr.t_statistic})
    tests = {"H1": h1, "H2": h2}
    family = list(s3["holm_family"])
    if family:
        adj = holm_correct([tests[h].p_value for h in family])
        for h, p in zip(family, adj.adjusted):
            tests[h].p_adjusted = p

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hypothesis", "test", "variables", "statistic", "p", "p_adjusted", "decision"])
    for h, r in tests.items():
        w.writerow([h, r.test, r.variables, f"{r.statistic_name}={float(r.statistic)!r}",
                    repr(float(r.p_value)), "" if r.p_adjusted is None else repr(float(r.p_adjusted)),
                    r.decision])
    nbuf = io.StringIO()
    w = csv.writer(nbuf, lineterminator="\n")
    w.writerow(["variable", "W", "p", "normal_at_alpha"])
    for r in normality:
        w.writerow([r.variables, repr(float(r.statistic)), repr(float(r.p_value)), not r.reject])
    artifacts = {
        "results": _write(out_dir, "stage3_results.csv", buf.getvalue()),
        "normality": _write(out_dir, "stage3_normality.csv", nbuf.getvalue()),
    }
    return {
        "n_rows": ds.n_rows,
        "normality": [r.to_dict() for r in normality],
        "hypotheses": {h: r.to_dict() for h, r in tests.items()},
        "holm_family": family,
        "artifacts": artifacts,
    }


# --- orchestration --------------------------------------------------------------

RUNNERS = {"stage1": run_stage1, "stage2": run_stage2, "stage3": run_stage3}


def ingest(cfg, out_dir):
    doc = {}
    for stage in ("stage1", "stage3"):
        if getattr(cfg, stage) is not None:
            doc[stage] = summarize(load_stage_data(cfg, stage))
    _write(out_dir, "ingest_summary.json", json.dumps(doc, indent=1))
    return doc


def load_report(out_dir):
    path = Path(out_dir) / REPORT_NAME
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def run_stages(cfg, stages, out_dir, n_jobs=None):
    """Run ``stages`` in order and merge their fragments into the run report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = load_report(out_dir) or {}
    report.update({"toolkit_version": __version__, "config": config_echo(cfg)})
    report.setdefault("stages", {})
    report.setdefault("timings", {})
    for stage in stages:
        start = time.perf_counter()
        report["stages"][stage] = RUNNERS[stage](cfg, out_dir, n_jobs)
        report["timings"][stage] = time.perf_counter() - start
    (out_dir / REPORT_NAME).write_text(json.dumps(report, indent=1, allow_nan=True), encoding="utf-8")
    return report


def config_echo(cfg):
    """Config with data and schema references made absolute."""
    doc = cfg.to_dict()
    for stage in ("stage1", "stage3"):
        section = doc.get(stage)
        if section is None:
            continue
        section["data"] = str(cfg.resolve(section["data"]).resolve())
        if isinstance(section["schema"], str):
            section["schema"] = [c.to_dict() for c in cfg.schema(stage)]
    return doc


def comparable(report):
    """Report minus wall-clock timings and the output location."""
    doc = json.loads(json.dumps(report))
    doc.pop("timings", None)
    doc.get("config", {}).pop("output_dir", None)
    return doc
