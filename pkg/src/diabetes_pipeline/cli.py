"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error,
1 any other pipeline failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from .config import PipelineConfig
from .errors import ConfigError, PipelineError
from .parallel import WORKERS_ENV
from .pipeline import REPORT_NAME, ingest, load_report, run_stages

STAGES = ("stage1", "stage2", "stage3")


def build_parser():
    parser = argparse.ArgumentParser(prog="diabetes-pipeline",
                                     description="Three-stage tabular diabetes analytics pipeline.")
    parser.add_argument("command", choices=("ingest", *STAGES, "all", "report"))
    parser.add_argument("--config", help="pipeline config JSON")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--workers", type=int,
                        help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    return parser


def _load_config(args):
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    cfg = PipelineConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    return cfg


def _out_dir(cfg, args):
    return Path(args.out) if args.out else cfg.resolve(cfg.output_dir)


def format_report(report):
    lines = [f"toolkit {report.get('toolkit_version')}  seed {report.get('config', {}).get('seed')}"]
    stages = report.get("stages", {})
    s1 = stages.get("stage1")
    if s1:
        lines.append("Stage 1 cross-validation (mean ± std)")
        lines.append(f"  {'model':<20}{'acc':>15}{'bal_acc':>15}{'recall':>15}{'f1':>15}{'roc_auc':>15}")
        for s in s1["cv"]:
            cells = "".join(f"{s['mean'][m]:>8.3f} ± {s['std'][m]:.3f}"
                            for m in ("accuracy", "balanced_accuracy", "recall", "f1", "roc_auc"))
            lines.append(f"  {s['label']:<20}{cells}")
        t = s1["test_set"]
        m = t["metrics"]
        lines.append(f"  held-out {t['model']}: {t['confusion']}  acc {m['accuracy']:.3f}  "
                     f"precision {m['precision']:.3f}  recall {m['recall']:.3f}  auc {m['roc_auc']:.3f}")
        if s1.get("shap"):
            lines.append(f"  SHAP strongest: {s1['shap']['strongest_model']}; "
                         f"consensus order: {', '.join(s1['shap']['consensus']['order'])}")
    s2 = stages.get("stage2")
    if s2:
        sw = s2["sweep"]
        lines.append(f"Stage 2 k-sweep over {s2['n_positive']} positives: selected k={sw['selected_k']}")
        for k, v in zip(sw["ks"], sw["indices"]):
            lines.append(f"  k={k}  s={v['silhouette']:.4f}  DB={v['davies_bouldin']:.4f}  "
                         f"CH={v['calinski_harabasz']:.2f}")
        lines.append(f"  orientation: {s2['profile']['orientation']}")
    s3 = stages.get("stage3")
    if s3:
        lines.append("Stage 3 hypothesis tests")
        for h, r in s3["hypotheses"].items():
            adj = "" if r["p_adjusted"] is None else f"  p_holm={r['p_adjusted']:.3g}"
            lines.append(f"  {h} {r['test']} {r['variables']}: {r['statistic_name']}={r['statistic']:.4f}"
                         f"  p={r['p_value']:.3g}{adj}  {r['decision']}")
    return "\n".join(lines)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.workers is not None:
        if args.workers < 1:
            print("error: --workers must be >= 1", file=sys.stderr)
            return ConfigError.exit_code
        os.environ[WORKERS_ENV] = str(args.workers)
    try:
        if args.command == "report":
            out = Path(args.out) if args.out else _out_dir(_load_config(args), args)
            report = load_report(out)
            if report is None:
                raise ConfigError(f"no {REPORT_NAME} in {out}")
            print(format_report(report))
            return 0
        cfg = _load_config(args)
        out = _out_dir(cfg, args)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "ingest":
            print(json.dumps(ingest(cfg, out), indent=1))
            return 0
        if args.command == "all":
            stages = [s for s in STAGES if _enabled(cfg, s)]
        else:
            if not _enabled(cfg, args.command):
                raise ConfigError(f"{args.command} is not configured")
            stages = [args.command]
        report = run_stages(cfg, stages, out)
        print(format_report(report))
        return 0
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def _enabled(cfg, stage):
    if stage == "stage2":
        return cfg.stage1 is not None and cfg.stage2 is not None and cfg.stage2.get("enabled", True)
    return getattr(cfg, stage) is not None


if __name__ == "__main__":
    sys.exit(main())
