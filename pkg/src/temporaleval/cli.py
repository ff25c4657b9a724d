"""Command-line surface.

Subcommands: split, simulate, run-grid, adapt, summarize, render-matrix.
Exit codes: 0 success, 1 usage error, 2 data error, 3 trainer error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .adaptation import METHODS
from .driftsim import DriftConfig, describe, generate
from .errors import DataError, TrainerError, UsageError
from .harness import (
    RunConfig,
    adaptation_report,
    parse_trainer,
    render_matrix_file,
    run_grid,
    summarize,
    write_summary,
)
from .records import TaskMetricKind, emit, ingest
from .splits import SplitPlan, plan_splits

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRAINER = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract is exit 1
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=".", help="output directory")


def _hp_pairs(values) -> dict:
    out = {}
    for item in values or []:
        if "=" not in item:
            raise UsageError(f"--hp expects key=value, got {item!r}")
        k, _, v = item.partition("=")
        out[k] = v
    return out


def build_parser() -> _Parser:
    parser = _Parser(prog="temporaleval", description="Temporal deterioration and adaptation measurement")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="build a temporal split plan")
    p.add_argument("--dataset", required=True)
    p.add_argument("--metric", required=True, help="span-micro-f1 | class-f1:CLASS | macro-f1")
    p.add_argument("--periods-per-split", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)

    p = sub.add_parser("simulate", help="generate a synthetic drift corpus")
    p.add_argument("--config", required=True, help="flat key=value drift config file")
    p.add_argument("--describe", action="store_true", help="print the drift report")
    _add_common(p)

    p = sub.add_parser("run-grid", help="train models and fill the evaluation grid")
    p.add_argument("--config", help="JSON run config; flags override")
    p.add_argument("--dataset")
    p.add_argument("--metric")
    p.add_argument("--trainer", help="builtin-classifier | builtin-tagger | external:CMD")
    p.add_argument("--periods-per-split", type=int)
    p.add_argument("--seeds", help="comma-separated training seeds")
    p.add_argument("--split-seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--hp", action="append", help="trainer hyperparameter key=value")
    _add_common(p)

    p = sub.add_parser("summarize", help="summary scores and tables from a grid CSV")
    p.add_argument("--grid", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--rounding", type=int, default=1)
    p.add_argument("--label", default="run")
    _add_common(p)

    p = sub.add_parser("adapt", help="label-free adaptation grids and comparison table")
    p.add_argument("--dataset", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--trainer", required=True)
    p.add_argument("--method", action="append", required=True, choices=list(METHODS))
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--periods-per-split", type=int, default=1)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--hp", action="append")
    _add_common(p)

    p = sub.add_parser("render-matrix", help="lower-triangular text table from a grid CSV")
    p.add_argument("--grid", required=True)
    p.add_argument("--rounding", type=int, default=1)
    _add_common(p)

    return parser


def _cmd_split(args) -> int:
    metric = TaskMetricKind.parse(args.metric)
    dataset = ingest(args.dataset, metric.task)
    plan = plan_splits(dataset, args.periods_per_split, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plan.save(out / "plan.json")
    print(f"{plan.n} splits of {plan.per_split_size} records -> {out / 'plan.json'}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = DriftConfig.from_file(args.config)
    dataset = generate(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "corpus.jsonl"
    emit(dataset, path)
    print(f"{len(dataset.records)} records over {config.periods} periods -> {path}")
    if args.describe:
        print(describe(dataset).to_text())
    return EXIT_OK


def _cmd_run_grid(args) -> int:
    overrides = {
        "dataset": args.dataset,
        "metric": args.metric,
        "trainer": args.trainer,
        "periods_per_split": args.periods_per_split,
        "split_seed": args.split_seed,
        "alpha": args.alpha,
        "workers": args.workers,
        "out": args.out if args.out != "." else None,
    }
    if args.seeds:
        overrides["seeds"] = [int(s) for s in args.seeds.split(",")]
    if args.hp:
        overrides["hyperparams"] = _hp_pairs(args.hp)
    if args.config:
        config = RunConfig.from_file(args.config, **overrides)
    else:
        required = ("dataset", "metric", "trainer")
        missing = [k for k in required if overrides.get(k) is None]
        if missing:
            raise UsageError(f"run-grid without --config needs {', '.join('--' + m for m in missing)}")
        doc = {k: v for k, v in overrides.items() if v is not None}
        doc.setdefault("out", args.out)
        config = RunConfig.from_dict(doc)
    result = run_grid(config)
    print(f"grid: {result.grid_path} ({result.n} splits, {result.trained_models} models trained this run)")
    if result.failed_cells:
        for err in result.errors:
            print(f"error: {err}", file=sys.stderr)
        print(f"{len(result.failed_cells)} cells failed", file=sys.stderr)
        return EXIT_TRAINER
    return EXIT_OK


def _cmd_summarize(args) -> int:
    scores, csv_text, md_text = summarize(args.grid, alpha=args.alpha, rounding=args.rounding, label=args.label)
    write_summary(args.out, csv_text, md_text)
    print(md_text, end="")
    return EXIT_OK


def _cmd_adapt(args) -> int:
    metric = TaskMetricKind.parse(args.metric)
    dataset = ingest(args.dataset, metric.task)
    trainer = parse_trainer(args.trainer, _hp_pairs(args.hp))
    plan = plan_splits(dataset, args.periods_per_split, args.split_seed)
    seeds = [int(s) for s in args.seeds.split(",")]
    if not 0.0 < args.fraction <= 1.0:
        raise UsageError("--fraction must be in (0, 1]")
    results = adaptation_report(
        dataset, plan, args.method, trainer, seeds, metric,
        out_dir=args.out, alpha=args.alpha, fraction=args.fraction,
    )
    print((Path(args.out) / "adaptation.md").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def _cmd_render_matrix(args) -> int:
    text = render_matrix_file(args.grid, decimals=args.rounding)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "matrix.md").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "split": _cmd_split,
    "simulate": _cmd_simulate,
    "run-grid": _cmd_run_grid,
    "summarize": _cmd_summarize,
    "adapt": _cmd_adapt,
    "render-matrix": _cmd_render_matrix,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainerError as exc:
        print(f"trainer error: {exc}", file=sys.stderr)
        return EXIT_TRAINER


if __name__ == "__main__":
    sys.exit(main())
