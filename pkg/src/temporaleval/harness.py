"""End-to-end orchestration: run evaluation grids, summarize, adapt.

A run trains one model per (train split, seed), evaluates it on every later
split and persists the grid as CSV. Runs are resumable: completed cells are
skipped when the same configuration hash is re-run, and a journal file makes
interrupted runs recoverable. The final CSV is byte-deterministic for a
given configuration regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import adaptation as adapt_mod
from .errors import DataError, TrainerError, UsageError
from .gridio import FAILED, load_grid, read_grid_csv, render_matrix, write_grid_csv
from .learners import TrainerSpec, evaluate_predictions, predict, train
from .records import TaskMetricKind, TemporalDataset, ingest
from .splits import SplitPlan, materialize_split, plan_splits
from .summary import SCORE_NAMES, SummaryScores, summarize_grid


@dataclass(frozen=True)
class RunConfig:
    dataset_path: str
    metric: TaskMetricKind
    trainer: TrainerSpec
    out_dir: str
    periods_per_split: int = 1
    seeds: tuple = (0, 1, 2)
    split_seed: int = 0
    alpha: float = 0.05
    rounding: int = 1
    workers: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise UsageError("need at least one seed")
        if not 0.0 < self.alpha < 1.0:
            raise UsageError("alpha must be in (0, 1)")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def config_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(Path(self.dataset_path).read_bytes())
        doc = {
            "metric": self.metric.spec_string(),
            "trainer": self.trainer.describe(),
            "periods_per_split": self.periods_per_split,
            "seeds": list(self.seeds),
            "split_seed": self.split_seed,
        }
        digest.update(json.dumps(doc, sort_keys=True).encode("utf-8"))
        return digest.hexdigest()

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        trainer = doc["trainer"]
        if isinstance(trainer, str):
            trainer = parse_trainer(trainer, doc.get("hyperparams", {}))
        return cls(
            dataset_path=doc["dataset"],
            metric=TaskMetricKind.parse(doc["metric"]),
            trainer=trainer,
            out_dir=doc["out"],
            periods_per_split=int(doc.get("periods_per_split", 1)),
            seeds=tuple(int(s) for s in doc.get("seeds", (0, 1, 2))),
            split_seed=int(doc.get("split_seed", 0)),
            alpha=float(doc.get("alpha", 0.05)),
            rounding=int(doc.get("rounding", 1)),
            workers=int(doc.get("workers", 1)),
        )


def parse_trainer(text: str, hyperparams: Optional[dict] = None) -> TrainerSpec:
    """CLI trainer syntax: builtin-classifier | builtin-tagger | external:CMD ARGS."""
    hp = tuple((hyperparams or {}).items())
    if text == "builtin-classifier":
        return TrainerSpec(kind="builtin-classifier", hyperparams=hp)
    if text == "builtin-tagger":
        return TrainerSpec(kind="builtin-tagger", hyperparams=hp)
    if text.startswith("external:"):
        command = text[len("external:") :].split()
        if not command:
            raise UsageError("external trainer command is empty")
        supports = (hyperparams or {}).get("supports_pretrain_phase", "0") in ("1", "true", "True")
        hp_rest = tuple((k, v) for k, v in (hyperparams or {}).items() if k != "supports_pretrain_phase")
        return TrainerSpec(kind="external", command=tuple(command), hyperparams=hp_rest,
                           supports_pretrain_phase=supports)
    raise UsageError(f"unknown trainer {text!r}")


@dataclass
class GridRunResult:
    grid_path: Path
    plan: SplitPlan
    n: int
    trained_models: int
    failed_cells: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def _journal_path(grid_path: Path) -> Path:
    return grid_path.with_suffix(".partial.csv")


def _append_journal(lock: threading.Lock, path: Path, key: tuple, value) -> None:
    line = f"{key[0]},{key[1]},{key[2]},{value}\n"
    with lock:
        with path.open("a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()


def _read_journal(path: Path) -> tuple:
    cells: dict = {}
    failed: list = []
    if not path.exists():
        return cells, failed
    for raw in path.read_text(encoding="utf-8").splitlines():
        parts = raw.split(",")
        if len(parts) != 4:
            continue  # torn write from a crash; the cell will be recomputed
        key = (int(parts[0]), int(parts[1]), int(parts[2]))
        if parts[3] == FAILED:
            failed.append(key)
        else:
            try:
                cells[key] = float(parts[3])
            except ValueError:
                continue
        # later journal entries win over earlier ones
    return cells, failed


def run_grid(config: RunConfig) -> GridRunResult:
    """Train n-1 models per seed and fill the lower-triangular grid."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = ingest(config.dataset_path, config.metric.task)
    config.metric.check_compatible(dataset)
    plan = plan_splits(dataset, config.periods_per_split, config.split_seed)
    plan.save(out / "plan.json")

    grid_path = out / "grid.csv"
    meta_path = out / "grid.meta.json"
    chash = config.config_hash()

    done: dict = {}
    if grid_path.exists():
        if not meta_path.exists():
            raise DataError(f"{grid_path} exists without {meta_path.name}; refusing to resume")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("config_hash") != chash:
            raise DataError("existing grid was produced by a different configuration; use a fresh --out")
        cells, _failed = read_grid_csv(grid_path)
        done.update(cells)  # failed cells are retried
    journal = _journal_path(grid_path)
    jcells, _jfailed = _read_journal(journal)
    done.update(jcells)

    n = plan.n
    wanted = [(i, j, s) for i in range(1, n) for j in range(i + 1, n + 1) for s in config.seeds]
    missing = [k for k in wanted if k not in done]
    units: dict = {}
    for (i, j, s) in missing:
        units.setdefault((i, s), []).append(j)

    lock = threading.Lock()
    result_cells = dict(done)
    failed_cells: list = []
    errors: list = []
    trained = 0

    def run_unit(unit) -> None:
        nonlocal trained
        (i, seed), js = unit
        views = materialize_split(dataset, plan, i, plan.seed)
        try:
            artifact = train(config.trainer, views.train, views.dev, config.metric, seed)
            with lock:
                trained += 1
        except TrainerError as exc:
            for j in js:
                _append_journal(lock, journal, (i, j, seed), FAILED)
                with lock:
                    failed_cells.append((i, j, seed))
                    errors.append(f"train split {i} seed {seed}: {exc}")
            return
        try:
            for j in sorted(js):
                test = materialize_split(dataset, plan, j, plan.seed).test
                try:
                    preds = predict(artifact, adapt_mod.strip_labels(test))
                    value = evaluate_predictions(test, preds, config.metric, inventory=dataset.label_inventory) * 100.0
                except TrainerError as exc:
                    _append_journal(lock, journal, (i, j, seed), FAILED)
                    with lock:
                        failed_cells.append((i, j, seed))
                        errors.append(f"cell ({i}, {j}) seed {seed}: {exc}")
                    continue
                _append_journal(lock, journal, (i, j, seed), repr(value))
                with lock:
                    result_cells[(i, j, seed)] = value
        finally:
            if hasattr(artifact.parameters, "close"):
                artifact.parameters.close()

    unit_list = sorted(units.items())
    if config.workers == 1:
        for unit in unit_list:
            run_unit(unit)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(run_unit, unit_list))

    write_grid_csv(grid_path, result_cells, failed=failed_cells)
    meta_path.write_text(json.dumps({"config_hash": chash, "n": n, "seeds": list(config.seeds)}, indent=2) + "\n", encoding="utf-8")
    if journal.exists():
        journal.unlink()
    return GridRunResult(
        grid_path=grid_path, plan=plan, n=n, trained_models=trained,
        failed_cells=failed_cells, errors=errors,
    )


SCORE_LABELS = {
    "ds_anchor": "D^a",
    "as_anchor": "A^a",
    "ds_consecutive": "D^t-1",
    "as_consecutive": "A^t-1",
}
PRESENTATION_ORDER = ("ds_anchor", "as_anchor", "ds_consecutive", "as_consecutive")


def format_score(value: float, significant: bool, decimals: int = 1) -> str:
    return f"{value:.{decimals}f}" + ("*" if significant else "")


def summary_table_md(scores: SummaryScores, label: str = "run", decimals: int = 1) -> str:
    """One-decimal presentation table with asterisks for significance."""
    header = ["", "M_s^s+1", "M_s^n", "M_n-1^n", "D^a", "A^a", "D^t-1", "A^t-1"]
    salient = [f"{v:.{decimals}f}" for v in scores.salient]
    row = [label] + salient + [
        format_score(scores[name].score, scores[name].significant, decimals)
        for name in PRESENTATION_ORDER
    ]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "---|" * len(header),
        "| " + " | ".join(row) + " |",
    ]
    return "\n".join(lines) + "\n"


def extremes_table_md(scores: SummaryScores, label: str = "run", decimals: int = 1) -> str:
    """Per-seed score minima and maxima for the statistically significant scores."""
    header = ["", "D^a", "A^a", "D^t-1", "A^t-1"]
    cells = []
    for name in PRESENTATION_ORDER:
        if not scores[name].significant:
            cells.append("-")
            continue
        lo, hi = scores.seed_extremes[name]
        cells.append(f"[{lo:.{decimals}f}, {hi:.{decimals}f}]")
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "---|" * len(header),
        "| " + " | ".join([label] + cells) + " |",
    ]
    if scores.single_seed:
        lines.append("")
        lines.append("(single seed: extremes equal the score itself)")
    return "\n".join(lines) + "\n"


def summary_csv_text(scores: SummaryScores) -> str:
    lines = ["quantity,value,p_value,significant,seed_min,seed_max,n_diffs"]
    for key, value in zip(("m_first", "m_longest_gap", "m_latest_retrain"), scores.salient):
        lines.append(f"{key},{value!r},,,,,")
    for name in SCORE_NAMES:
        s = scores[name]
        lo, hi = scores.seed_extremes[name]
        lines.append(
            f"{name},{s.score!r},{s.test.p_value!r},{int(s.significant)},{lo!r},{hi!r},{len(s.result.diffs)}"
        )
    return "\n".join(lines) + "\n"


def summarize(grid_path, alpha: float = 0.05, rounding: int = 1, label: str = "run") -> tuple:
    """Returns (SummaryScores, summary.csv text, summary.md text)."""
    grid = load_grid(grid_path)
    scores = summarize_grid(grid, alpha=alpha)
    md = summary_table_md(scores, label=label, decimals=rounding)
    md += "\n" + extremes_table_md(scores, label=label, decimals=rounding)
    return scores, summary_csv_text(scores), md


def write_summary(out_dir, scores_csv: str, scores_md: str) -> tuple:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "summary.csv"
    md_path = out / "summary.md"
    csv_path.write_text(scores_csv, encoding="utf-8")
    md_path.write_text(scores_md, encoding="utf-8")
    return csv_path, md_path


def render_matrix_file(grid_path, decimals: int = 1) -> str:
    cells, _failed = read_grid_csv(grid_path)
    return render_matrix(cells, decimals=decimals)


def adaptation_report(
    dataset: TemporalDataset,
    plan: SplitPlan,
    methods: Sequence[str],
    trainer: TrainerSpec,
    seeds: Sequence[int],
    metric: TaskMetricKind,
    out_dir,
    alpha: float = 0.05,
    fraction: float = 1.0,
    decimals: int = 1,
) -> dict:
    """Run adaptation grids for each method and emit the comparison table.

    Writes grid-<method>.csv, adaptation.csv (with a method column) and
    adaptation.md (anchor adaptation scores, one row per method). Returns
    {method: (grid, scores)}.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    for method in methods:
        grid, scores = adapt_mod.adaptation_grid(
            dataset, plan, method, trainer, seeds, metric, alpha=alpha, fraction=fraction
        )
        write_grid_csv(out / f"grid-{method}.csv", grid.cells)
        results[method] = (grid, scores)

    combined = ["method,train_split,test_split,seed,metric_value"]
    for method in methods:
        grid, _ = results[method]
        for (i, j, s) in sorted(grid.cells):
            combined.append(f"{method},{i},{j},{s},{grid.cells[(i, j, s)]!r}")
    (out / "adaptation.csv").write_text("\n".join(combined) + "\n", encoding="utf-8")

    lines = ["| method | A^a | A^t-1 |", "|---|---|---|"]
    for method in methods:
        _, scores = results[method]
        lines.append(
            f"| {method} | "
            + format_score(scores['as_anchor'].score, scores['as_anchor'].significant, decimals)
            + " | "
            + format_score(scores['as_consecutive'].score, scores['as_consecutive'].significant, decimals)
            + " |"
        )
    (out / "adaptation.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return results
