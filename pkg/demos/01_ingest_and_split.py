#!/usr/bin/env python3
"""Generate a drifting corpus, write it to disk, ingest it back and plan splits.

Shows the corpus JSONL format, canonical ordering, the equal-size temporal
split plan with downsampling, and the 80-20 train/dev views.
"""

from pathlib import Path

from temporaleval import DriftConfig, Task, generate, ingest, emit, materialize_split, plan_splits

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

config = DriftConfig(periods=6, records_per_period=500, vocab_size=900, churn=0.3, seed=7)
corpus = generate(config)
path = OUT / "corpus.jsonl"
emit(corpus, path)
print(f"wrote {len(corpus.records)} records to {path}")

dataset = ingest(path, Task.CLASSIFICATION)
print(f"ingested periods {dataset.period_range}, labels {sorted(dataset.label_inventory)}")

plan = plan_splits(dataset, periods_per_split=1, seed=0)
print(f"{plan.n} splits, {plan.per_split_size} records each (downsampled to the smallest)")
plan.save(OUT / "plan.json")

views = materialize_split(dataset, plan, t=1, seed=plan.seed)
print(f"split 1: {len(views.train)} train / {len(views.dev)} dev / {len(views.test)} test")
print("dev always comes from the training split's own period, never the test period")
