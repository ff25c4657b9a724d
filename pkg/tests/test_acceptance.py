"""Acceptance suite: one test per acceptance criterion, one PASS line each.

The end-to-end criteria run the real pipeline: a synthetic drift corpus is
written to disk, the grid runner trains built-in classifiers over three
seeds, and summary scores with exact Wilcoxon significance are computed from
the persisted CSV.
"""

from __future__ import annotations

import random
import time
from pathlib import Path

import pytest

from oracles import (
    brute_class_f1,
    brute_macro_f1,
    brute_span_micro_f1,
    brute_wilcoxon_two_sided,
)
from table_fixtures import (
    GLOVE_EXPECTED,
    GLOVE_NER,
    GLOVE_SIGNIFICANT,
    ROBERTA_EXPECTED,
    ROBERTA_SIGNIFICANT,
)
from temporaleval.adaptation import AdaptationJob, adaptation_grid, sample_fraction, self_label_adapt
from temporaleval.driftsim import DriftConfig, generate
from temporaleval.harness import RunConfig, run_grid, summarize, summary_table_md, write_summary
from temporaleval.learners import TrainerSpec, train
from temporaleval.metrics import class_f1, extract_spans, macro_f1, span_micro_f1
from temporaleval.records import TaskMetricKind, emit, ingest
from temporaleval.splits import materialize_split, plan_splits
from temporaleval.stats import wilcoxon_signed_rank
from temporaleval.summary import (
    SCORE_FUNCTIONS,
    EvaluationGrid,
    adaptation_consecutive,
    expected_diff_count,
    summarize_grid,
)

FIXTURES = Path(__file__).parent / "fixtures"
SCORE_ORDER = ("ds_anchor", "as_anchor", "ds_consecutive", "as_consecutive")
ACCEPTANCE_SEEDS = (0, 1, 2)


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"[{status}] {name}{suffix}")
    assert ok, f"{name}{suffix}"


# --- shared expensive artifacts -------------------------------------------------

DRIFT_CONFIG = DriftConfig(periods=6, records_per_period=2000, churn=0.3, seed=11)


@pytest.fixture(scope="module")
def drift_corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("acceptance") / "drift_corpus.jsonl"
    emit(generate(DRIFT_CONFIG), path)
    return path


@pytest.fixture(scope="module")
def drift_run(drift_corpus_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance_run")
    config = RunConfig(
        dataset_path=str(drift_corpus_path),
        metric=TaskMetricKind.macro_f1(),
        trainer=TrainerSpec.builtin_classifier(),
        out_dir=str(out),
        seeds=ACCEPTANCE_SEEDS,
    )
    start = time.perf_counter()
    result = run_grid(config)
    elapsed = time.perf_counter() - start
    scores, csv_text, md_text = summarize(result.grid_path)
    write_summary(out, csv_text, md_text)
    return {"config": config, "result": result, "elapsed": elapsed, "scores": scores, "out": out}


# --- criteria -------------------------------------------------------------------

def test_table_reproduction():
    start = time.perf_counter()
    rows = {}
    for name, expected, flags in (
        ("glove", GLOVE_EXPECTED, GLOVE_SIGNIFICANT),
        ("roberta", ROBERTA_EXPECTED, ROBERTA_SIGNIFICANT),
    ):
        scores, _, _ = summarize(FIXTURES / f"{name}_ner_grid.csv", label=name)
        got = tuple(round(v, 1) for v in scores.salient) + tuple(
            round(scores[s].score, 1) for s in SCORE_ORDER
        )
        got_flags = tuple(scores[s].significant for s in SCORE_ORDER)
        rows[name] = (got == expected) and (got_flags == flags)
    elapsed = time.perf_counter() - start
    report(
        "table-1-to-table-2 reproduction",
        rows["glove"] and rows["roberta"] and elapsed < 1.0,
        f"glove={rows['glove']} roberta={rows['roberta']} runtime={elapsed:.3f}s",
    )


def test_wilcoxon_oracle():
    rng = random.Random(2024)
    max_gap = 0.0
    for _ in range(200):
        n = rng.randint(1, 12)
        diffs = []
        for _ in range(n):
            roll = rng.random()
            if roll < 0.15:
                diffs.append(0.0)
            elif roll < 0.55:
                diffs.append(float(rng.randint(-4, 4)))
            else:
                diffs.append(rng.uniform(-10, 10))
        ours = wilcoxon_signed_rank(diffs).p_value
        oracle, _, _ = brute_wilcoxon_two_sided(diffs)
        max_gap = max(max_gap, abs(ours - oracle))
    vectors_ok = max_gap <= 1e-12

    grid = EvaluationGrid.from_mean_matrix(GLOVE_NER, n=6)
    diffs = adaptation_consecutive(grid).diffs
    ours = wilcoxon_signed_rank(diffs)
    oracle_p, _, oracle_wm = brute_wilcoxon_two_sided(diffs)
    glove_ok = (
        ours.w_minus == 5.0
        and oracle_wm == 5.0
        and abs(ours.p_value - oracle_p) <= 1e-4
        and abs(ours.p_value - 0.0195) < 1e-3
    )
    report(
        "wilcoxon exact vs enumeration oracle",
        vectors_ok and glove_ok,
        f"max |p diff| = {max_gap:.2e}; glove W-=5 p={ours.p_value:.6f}",
    )


def _random_tags(rng, length):
    tags = []
    for _ in range(length):
        roll = rng.random()
        if roll < 0.5:
            tags.append("O")
        elif roll < 0.75:
            tags.append(f"B-{rng.choice('XYZ')}")
        else:
            tags.append(f"I-{rng.choice('XYZ')}")
    return tags


def test_metric_oracles():
    rng = random.Random(77)
    span_ok = True
    for _ in range(1000):
        gold, pred = [], []
        for _ in range(rng.randint(1, 10)):
            length = rng.randint(1, 8)
            gold.append(extract_spans(_random_tags(rng, length)))
            pred.append(extract_spans(_random_tags(rng, length)))
        ref = brute_span_micro_f1(
            [{(s.start, s.end, s.label) for s in g} for g in gold],
            [{(s.start, s.end, s.label) for s in p} for p in pred],
        )
        span_ok = span_ok and span_micro_f1(gold, pred).value == ref

    classes = ["a", "b", "c"]
    class_ok = True
    macro_ok = True
    for _ in range(1000):
        n = rng.randint(1, 20)
        gold = [rng.choice(classes) for _ in range(n)]
        pred = [rng.choice(classes) for _ in range(n)]
        target = rng.choice(classes)
        class_ok = class_ok and class_f1(gold, pred, target).value == brute_class_f1(gold, pred, target)
        ours = macro_f1(gold, pred, inventory=classes).value
        macro_ok = macro_ok and abs(ours - brute_macro_f1(gold, pred, classes)) <= 1e-12
    report(
        "task-metric brute-force oracles",
        span_ok and class_ok and macro_ok,
        f"span={span_ok} class={class_ok} macro={macro_ok}",
    )


def test_summary_score_properties():
    rng = random.Random(5150)
    ok = True
    for _ in range(500):
        n = rng.randint(3, 8)
        cells = {
            (i, j, 0): rng.uniform(0, 100) for i in range(1, n) for j in range(i + 1, n + 1)
        }
        grid = EvaluationGrid(n=n, seeds=(0,), cells=cells)
        shift = rng.uniform(-40, 40)
        scale = rng.uniform(0.1, 4.0)
        shifted = EvaluationGrid(n=n, seeds=(0,), cells={k: v + shift for k, v in cells.items()})
        scaled = EvaluationGrid(n=n, seeds=(0,), cells={k: v * scale for k, v in cells.items()})
        constant = EvaluationGrid(n=n, seeds=(0,), cells={k: 7.5 for k in cells})
        for fn in SCORE_FUNCTIONS.values():
            base = fn(grid)
            ok = ok and len(base.diffs) == expected_diff_count(n)
            ok = ok and abs(fn(shifted).score - base.score) < 1e-9
            ok = ok and abs(fn(scaled).score - base.score * scale) < 1e-9 + 1e-9 * abs(base.score)
            ok = ok and fn(constant).score == 0.0
        if not ok:
            break
    report("summary-score properties on 500 random grids", ok)


def test_drift_grid_completes_and_adapts(drift_run):
    elapsed = drift_run["elapsed"]
    scores = drift_run["scores"]
    asa = scores["as_anchor"]
    report(
        "drift corpus grid: runtime and positive significant AS^a",
        elapsed < 300 and asa.score > 0 and asa.test.p_value < 0.05,
        f"runtime={elapsed:.1f}s AS^a={asa.score:+.2f} p={asa.test.p_value:.4f}",
    )


def test_zero_churn_control(drift_corpus_path, tmp_path_factory):
    control_seeds = (101, 202, 303, 404, 505)
    clean_runs = 0
    details = []
    for corpus_seed in control_seeds:
        control = DriftConfig(periods=6, records_per_period=2000, churn=0.0, seed=corpus_seed)
        out = tmp_path_factory.mktemp(f"control_{corpus_seed}")
        path = out / "corpus.jsonl"
        emit(generate(control), path)
        config = RunConfig(
            dataset_path=str(path),
            metric=TaskMetricKind.macro_f1(),
            trainer=TrainerSpec.builtin_classifier(),
            out_dir=str(out),
            seeds=ACCEPTANCE_SEEDS,
        )
        result = run_grid(config)
        scores, _, _ = summarize(result.grid_path)
        any_sig = any(scores[name].significant for name in SCORE_ORDER)
        clean_runs += 0 if any_sig else 1
        details.append(f"{corpus_seed}:{'sig' if any_sig else 'clean'}")
    report(
        "zero-churn control: no significant score in >= 4 of 5 runs",
        clean_runs >= 4,
        f"clean {clean_runs}/5 [{' '.join(details)}]",
    )


def test_self_label_direction(drift_corpus_path, drift_run):
    dataset = ingest(drift_corpus_path, TaskMetricKind.macro_f1().task)
    plan = plan_splits(dataset, 1, seed=0)
    metric = TaskMetricKind.macro_f1()
    trainer = TrainerSpec.builtin_classifier()
    _, self_scores = adaptation_grid(
        dataset, plan, "self-label", trainer, ACCEPTANCE_SEEDS, metric
    )
    gold_asa = drift_run["scores"]["as_anchor"].score
    self_asa = self_scores["as_anchor"]
    # Reported, not asserted: how gold retraining compares to self-labeling.
    print(
        f"[REPORT] GoldRetrain AS^a = {gold_asa:+.2f} vs SelfLabel AS^a = {self_asa.score:+.2f} "
        f"(gold >= self-label: {gold_asa >= self_asa.score})"
    )
    report(
        "self-labeling yields positive significant AS^a",
        self_asa.score > 0 and self_asa.test.p_value < 0.05,
        f"AS^a={self_asa.score:+.2f} p={self_asa.test.p_value:.4f}",
    )


def test_perfect_oracle_equivalence(drift_corpus_path):
    dataset = ingest(drift_corpus_path, TaskMetricKind.macro_f1().task)
    plan = plan_splits(dataset, 1, seed=0)
    metric = TaskMetricKind.macro_f1()
    trainer = TrainerSpec.builtin_classifier(epochs=8)
    job = AdaptationJob(method="self-label", source=1, target=2, trainer=trainer, seed=1, n=plan.n)
    gold_by_id = {r.id: r.label for r in dataset.records}

    via_self_label = self_label_adapt(
        dataset, plan, job, metric, label_fn=lambda recs: [gold_by_id[r.id] for r in recs]
    )
    views1 = materialize_split(dataset, plan, 1, plan.seed)
    views2 = materialize_split(dataset, plan, 2, plan.seed)
    portion = sample_fraction(views2.test, job.fraction, plan.seed, 1, 2)
    mixture = list(views1.train) + [r.stripped().with_label(gold_by_id[r.id]) for r in portion]
    direct = train(trainer, mixture, views1.dev, metric, job.seed).with_split(job.target)
    report(
        "perfect-oracle self-labeling equals gold retraining byte-for-byte",
        via_self_label.to_bytes() == direct.to_bytes(),
    )


def test_determinism_byte_identical_rerun(drift_run, tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance_rerun")
    config = RunConfig(
        dataset_path=drift_run["config"].dataset_path,
        metric=TaskMetricKind.macro_f1(),
        trainer=TrainerSpec.builtin_classifier(),
        out_dir=str(out),
        seeds=ACCEPTANCE_SEEDS,
    )
    result = run_grid(config)
    scores, csv_text, md_text = summarize(result.grid_path)
    write_summary(out, csv_text, md_text)
    first_out = drift_run["out"]
    grids_match = (first_out / "grid.csv").read_bytes() == (out / "grid.csv").read_bytes()
    summaries_match = (first_out / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()
    report(
        "re-run with identical config is byte-identical",
        grids_match and summaries_match,
        f"grid.csv={grids_match} summary.csv={summaries_match}",
    )
