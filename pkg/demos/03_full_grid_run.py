#!/usr/bin/env python3
"""End-to-end grid run: train models over three seeds, persist and summarize.

Uses the built-in hashed-feature classifier on a drifting corpus. The grid
CSV is the single interchange artifact: summarize and render-matrix work
from it alone, so grids produced elsewhere (real transformer runs) can be
analyzed the same way.
"""

from pathlib import Path

from temporaleval import DriftConfig, TaskMetricKind, generate, emit
from temporaleval.harness import RunConfig, run_grid, summarize, write_summary
from temporaleval.gridio import read_grid_csv, render_matrix
from temporaleval.learners import TrainerSpec

OUT = Path(__file__).parent / "out" / "grid_run"
OUT.mkdir(parents=True, exist_ok=True)

corpus_path = OUT / "corpus.jsonl"
emit(generate(DriftConfig(periods=6, records_per_period=800, vocab_size=1200, churn=0.3, seed=3)), corpus_path)

config = RunConfig(
    dataset_path=str(corpus_path),
    metric=TaskMetricKind.macro_f1(),
    trainer=TrainerSpec.builtin_classifier(),
    out_dir=str(OUT),
    seeds=(0, 1, 2),
)
result = run_grid(config)
print(f"trained {result.trained_models} models -> {result.grid_path}")

cells, _ = read_grid_csv(result.grid_path)
print(render_matrix(cells))

scores, csv_text, md_text = summarize(result.grid_path, label="builtin")
write_summary(OUT, csv_text, md_text)
print(md_text)
print("re-running is free: completed cells are skipped under the same config hash")
again = run_grid(config)
print(f"second run trained {again.trained_models} models")
