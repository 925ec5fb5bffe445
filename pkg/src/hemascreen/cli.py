"""Batch command-line front end.

Subcommands: ingest, summary, stats, evaluate, importance.  Configuration
comes from an optional JSON file with flag overrides (flags win).  All
artifacts are written atomically (temp file + rename) into the output
directory, and exit codes are stable: 0 success, 2 input problems,
3 statistics failures, 4 modeling failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import svgplot
from .dataset import (
    FEATURE_NAMES,
    ColumnMapping,
    Location,
    Label,
    canonical_mapping,
    cohort_summary,
    cohort_to_csv,
    default_source_mapping,
    parse_dataset,
    select_cohort,
)
from .errors import (
    BadNeighborCount,
    ConflictingAdmission,
    DegenerateFeature,
    EmptyCohort,
    EmptySample,
    HemascreenError,
    MalformedHeader,
    MalformedRow,
    ManifestMismatch,
    NonFinite,
    SingleClass,
    SingleClassCohort,
    TooFewMinority,
    TooFewPerClass,
    UnsupportedModel,
)
from .metrics import ModelSpec, cross_validate
from .models import records_matrix, train_for_spec, variable_importance
from .resample import stratified_kfold
from .seeding import derive_seed
from .stats import boxplot_summary, significance_table, significance_to_json

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STATS = 3
EXIT_MODEL = 4

DATA_ENV_VAR = "HEMASCREEN_DATA"

COHORT_FILTERS = {
    "community": (Location.Community,),
    "regular-ward": (Location.RegularWard,),
    "all-modeled": (Location.Community, Location.RegularWard),
}

_INPUT_ERRORS = (
    OSError,
    MalformedHeader,
    MalformedRow,
    ConflictingAdmission,
    EmptyCohort,
    json.JSONDecodeError,
)
_STATS_ERRORS = (SingleClassCohort, EmptySample, DegenerateFeature)
_MODEL_ERRORS = (
    SingleClass,
    NonFinite,
    TooFewPerClass,
    TooFewMinority,
    BadNeighborCount,
    ManifestMismatch,
    UnsupportedModel,
)


@dataclass
class RunConfig:
    data: str | None = None
    mapping: str | None = None
    cohort: str = "all-modeled"
    models: list[str] = field(default_factory=lambda: ["ann", "rf", "glmnet", "lr-mlep"])
    folds: int = 10
    repeats: int = 1
    master_seed: int = 42
    smote: bool = False
    out: str = "out"
    plots: bool = True
    hyperparams: dict = field(default_factory=dict)  # per-model overrides

    def validate(self):
        if self.cohort not in COHORT_FILTERS:
            raise ValueError(f"unknown cohort {self.cohort!r}")
        for model in self.models:
            if model not in ModelSpec.FAMILIES:
                raise ValueError(f"unknown model {model!r}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        for key in ("data", "mapping", "cohort", "folds", "repeats", "smote", "out", "plots", "hyperparams"):
            if key in raw:
                setattr(cfg, key, raw[key])
        if "models" in raw:
            cfg.models = list(raw["models"])
        if "seed" in raw:
            cfg.master_seed = int(raw["seed"])
    # flags win over the file; the environment is the last-resort data path
    if args.data:
        cfg.data = args.data
    if cfg.data is None:
        cfg.data = os.environ.get(DATA_ENV_VAR)
    if args.mapping:
        cfg.mapping = args.mapping
    if getattr(args, "cohort", None):
        cfg.cohort = args.cohort
    if getattr(args, "models", None):
        cfg.models = [m.strip() for m in args.models.split(",") if m.strip()]
    if getattr(args, "folds", None) is not None:
        cfg.folds = args.folds
    if getattr(args, "repeats", None) is not None:
        cfg.repeats = args.repeats
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    if getattr(args, "smote", False):
        cfg.smote = True
    if args.out:
        cfg.out = args.out
    if getattr(args, "no_plots", False):
        cfg.plots = False
    cfg.validate()
    return cfg


def write_text_atomic(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    tmp.write_text(content, encoding="utf-8")
    os.replace(tmp, path)


def write_json_atomic(path: Path, obj: dict) -> None:
    write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def resolve_mapping(cfg: RunConfig) -> ColumnMapping:
    if cfg.mapping:
        return ColumnMapping.from_json(cfg.mapping)
    # No mapping given: accept our own canonical cohort CSVs directly,
    # otherwise assume the public source file layout.
    with open(cfg.data, encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if set(FEATURE_NAMES) <= set(header) and "patient_id" in header:
        return canonical_mapping()
    return default_source_mapping()


def load_records(cfg: RunConfig):
    if not cfg.data:
        raise FileNotFoundError(
            f"no data path: pass --data, set {DATA_ENV_VAR}, or put it in the config"
        )
    if not Path(cfg.data).exists():
        raise FileNotFoundError(f"data file not found: {cfg.data}")
    mapping = resolve_mapping(cfg)
    return parse_dataset(cfg.data, mapping)


def build_cohort(cfg: RunConfig, parse_result, cohort_name: str | None = None):
    name = cohort_name or cfg.cohort
    return select_cohort(
        parse_result.records,
        COHORT_FILTERS[name],
        provenance={"source_digest": parse_result.source_digest, "cohort": name},
    )


def cmd_ingest(cfg: RunConfig) -> int:
    result = load_records(cfg)
    out = Path(cfg.out)
    write_json_atomic(out / "ingestion_report.json", result.report())
    print(f"kept {len(result.records)} records, excluded {result.n_excluded}")

    cohort = build_cohort(cfg, result)
    buffer = io.StringIO()
    cohort_to_csv(cohort, buffer)
    write_text_atomic(out / f"cohort_{cfg.cohort}.csv", buffer.getvalue())
    print(f"wrote cohort_{cfg.cohort}.csv ({len(cohort)} rows)")
    return EXIT_OK


def cmd_summary(cfg: RunConfig) -> int:
    result = load_records(cfg)
    summary = cohort_summary(result.records)
    summary["source_digest"] = result.source_digest
    write_json_atomic(Path(cfg.out) / "summary.json", summary)
    totals = summary["outcome_by_location"]["Total"]
    print(f"{totals['total']} records: {totals['positive']} positive / {totals['negative']} negative")
    return EXIT_OK


def _stats_cohort_names(cfg: RunConfig) -> list[str]:
    return ["community", "regular-ward"] if cfg.cohort == "all-modeled" else [cfg.cohort]


def cmd_stats(cfg: RunConfig) -> int:
    result = load_records(cfg)
    out = Path(cfg.out)
    names = _stats_cohort_names(cfg)

    grid: dict[str, dict] = {name: {} for name in FEATURE_NAMES}
    for name in names:
        cohort = build_cohort(cfg, result, name)
        table = significance_table(cohort)
        write_json_atomic(out / f"significance_{name}.json", significance_to_json(table))
        n_sig = sum(1 for row in table if row.p_value < 0.05)
        print(f"{name}: {n_sig} of {len(table)} features at p < 0.05")

        p_by_feature = {row.feature: row.p_value for row in table}
        for feature in FEATURE_NAMES:
            pos = [r.features[feature] for r in cohort.records if r.label is Label.Positive]
            neg = [r.features[feature] for r in cohort.records if r.label is Label.Negative]
            grid[feature][name] = {
                "positive": boxplot_summary(pos),
                "negative": boxplot_summary(neg),
                "p_value": p_by_feature[feature],
            }

    if cfg.plots:
        svg = svgplot.box_grid_svg(grid, list(FEATURE_NAMES), names)
        write_text_atomic(out / "boxplot_grid.svg", svg)
    return EXIT_OK


def _comparison_row(report) -> dict:
    agg = report.aggregate()
    return {
        "sensitivity": agg["sensitivity"]["mean"],
        "specificity": agg["specificity"]["mean"],
        "accuracy": agg["accuracy"]["mean"],
        "auc": agg["auc"]["mean"],
        "auc_sd": agg["auc"]["sd"],
        "sensitivity_at_half": agg["sensitivity_at_half"]["mean"],
        "specificity_at_half": agg["specificity_at_half"]["mean"],
        "accuracy_at_half": agg["accuracy_at_half"]["mean"],
    }


def cmd_evaluate(cfg: RunConfig) -> int:
    result = load_records(cfg)
    cohort = build_cohort(cfg, result)
    out = Path(cfg.out)

    plan = stratified_kfold(
        cohort.labels(), k=cfg.folds, repeats=cfg.repeats, master_seed=cfg.master_seed
    )
    write_text_atomic(out / f"{cfg.cohort}_foldplan.json", plan.to_json_text())

    comparison = {}
    for model_name in cfg.models:
        spec = ModelSpec(model_name, cfg.hyperparams.get(model_name, {}))
        report = cross_validate(cohort, spec, plan, smote=cfg.smote)
        write_text_atomic(out / f"{cfg.cohort}_{model_name}_report.json", report.to_json_text())
        if cfg.plots:
            raw = report.to_json()
            write_text_atomic(out / f"{cfg.cohort}_{model_name}_roc.svg", svgplot.roc_overlay_svg(raw))
            write_text_atomic(out / f"{cfg.cohort}_{model_name}_confusion.svg", svgplot.confusion_svg(raw))
        comparison[model_name] = _comparison_row(report)
        agg = report.aggregate()
        print(
            f"{cfg.cohort} {model_name}: AUC {agg['auc']['mean']:.3f} ± {agg['auc']['sd']:.3f}"
        )

    write_json_atomic(
        out / f"{cfg.cohort}_comparison.json",
        {
            "schema": "hemascreen.comparison/1",
            "cohort": cfg.cohort,
            "k": cfg.folds,
            "repeats": cfg.repeats,
            "seed": cfg.master_seed,
            "smote": cfg.smote,
            "models": comparison,
        },
    )
    return EXIT_OK


def cmd_importance(cfg: RunConfig) -> int:
    supported = [m for m in cfg.models if m in ("rf", "glmnet")]
    unsupported = [m for m in cfg.models if m not in ("rf", "glmnet")]
    if unsupported or not supported:
        raise UnsupportedModel(
            f"importance needs rf or glmnet, got {', '.join(cfg.models)}"
        )
    result = load_records(cfg)
    cohort = build_cohort(cfg, result)
    out = Path(cfg.out)

    # Hold out one stratified fifth for permutation scoring; train on the rest.
    plan = stratified_kfold(cohort.labels(), k=5, repeats=1, master_seed=cfg.master_seed)
    train_idx = plan.train_indices(0, 0)
    eval_idx = plan.test_indices(0, 0)
    train_records = [cohort.records[i] for i in train_idx]
    eval_records = [cohort.records[i] for i in eval_idx]

    for model_name in supported:
        spec = ModelSpec(model_name, cfg.hyperparams.get(model_name, {}))
        trained = train_for_spec(
            spec, train_records, cohort.feature_manifest,
            seed=derive_seed(cfg.master_seed, "importance-fit", model_name),
        )
        X_eval = records_matrix(eval_records, cohort.feature_manifest)
        y_eval = [1 if r.label is Label.Positive else 0 for r in eval_records]
        table = variable_importance(
            trained, X_eval, y_eval, seed=derive_seed(cfg.master_seed, "importance", model_name)
        )
        write_json_atomic(
            out / f"{cfg.cohort}_{model_name}_importance.json",
            {
                "schema": "hemascreen.importance/1",
                "cohort": cfg.cohort,
                "model": model_name,
                "seed": cfg.master_seed,
                "importance": [{"feature": f, "importance": v} for f, v in table],
            },
        )
        if cfg.plots:
            svg = svgplot.importance_svg(table, f"{model_name} variable importance ({cfg.cohort})")
            write_text_atomic(out / f"{cfg.cohort}_{model_name}_importance.svg", svg)
        print(f"{cfg.cohort} {model_name}: top feature {table[0][0]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hemascreen",
        description="Blood-count screening pipeline: ingest, screen, evaluate, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("ingest", "parse the source CSV, write the cohort CSV and ingestion report"),
        ("summary", "write the cohort/pathogen tabulations"),
        ("stats", "rank-sum significance screen and box-plot grid"),
        ("evaluate", "cross-validated model evaluation reports and plots"),
        ("importance", "variable importance for rf/glmnet"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--data", help=f"source CSV (default: ${DATA_ENV_VAR})")
        p.add_argument("--mapping", help="column mapping JSON")
        p.add_argument("--cohort", choices=sorted(COHORT_FILTERS))
        p.add_argument("--out", help="output directory (default: out)")
        if name in ("evaluate", "importance"):
            p.add_argument("--models", help="comma-separated model list")
            p.add_argument("--seed", type=int)
        if name == "evaluate":
            p.add_argument("--folds", type=int)
            p.add_argument("--repeats", type=int)
            p.add_argument("--smote", action="store_true")
        if name in ("stats", "evaluate", "importance"):
            p.add_argument("--no-plots", action="store_true")
    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "summary": cmd_summary,
    "stats": cmd_stats,
    "evaluate": cmd_evaluate,
    "importance": cmd_importance,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return _COMMANDS[args.command](cfg)
    except _INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _STATS_ERRORS as exc:
        print(f"statistics error: {exc}", file=sys.stderr)
        return EXIT_STATS
    except _MODEL_ERRORS as exc:
        print(f"modeling error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except HemascreenError as exc:  # anything else from the pipeline
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
