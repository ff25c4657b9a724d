from __future__ import annotations

import sys
from pathlib import Path

import pytest

from temporaleval.adaptation import (
    AdaptationJob,
    adaptation_grid,
    continual_pretrain_adapt,
    cumulative_self_label_adapt,
    sample_fraction,
    self_label_adapt,
    strip_labels,
)
from temporaleval.driftsim import DriftConfig, generate
from temporaleval.errors import UnsupportedCapability, UsageError
from temporaleval.learners import TrainerSpec, train
from temporaleval.records import TaskMetricKind
from temporaleval.splits import materialize_split, plan_splits

MOCK = str(Path(__file__).parent / "mock_trainer.py")
METRIC = TaskMetricKind.macro_f1()


def small_corpus(churn=0.3, periods=5, per_period=120, seed=3):
    return generate(
        DriftConfig(periods=periods, records_per_period=per_period, vocab_size=600, churn=churn, seed=seed)
    )


@pytest.fixture(scope="module")
def corpus_and_plan():
    ds = small_corpus()
    return ds, plan_splits(ds, 1, seed=0)


def classifier(**hp):
    hp.setdefault("epochs", 8)
    return TrainerSpec.builtin_classifier(**hp)


def test_job_bounds():
    spec = classifier()
    with pytest.raises(UsageError):
        AdaptationJob(method="self-label", source=2, target=2, trainer=spec, seed=0)
    with pytest.raises(UsageError):
        AdaptationJob(method="self-label", source=1, target=5, trainer=spec, seed=0, n=5)
    with pytest.raises(UsageError):
        AdaptationJob(method="self-label", source=1, target=2, trainer=spec, seed=0, fraction=0.0)
    with pytest.raises(UsageError):
        AdaptationJob(method="mystery", source=1, target=2, trainer=spec, seed=0)


def test_mixture_sizes_full_and_fraction(corpus_and_plan):
    ds, plan = corpus_and_plan
    views1 = materialize_split(ds, plan, 1, plan.seed)
    views2 = materialize_split(ds, plan, 2, plan.seed)
    full = sample_fraction(views2.test, 1.0, plan.seed, 1, 2)
    quarter = sample_fraction(views2.test, 0.25, plan.seed, 1, 2)
    assert len(full) == len(views2.test)
    assert len(quarter) == round(0.25 * len(views2.test))
    assert len(views1.train) + len(full) == len(views1.train) + len(views2.test)
    # monotone in the fraction
    sizes = [len(sample_fraction(views2.test, f, plan.seed, 1, 2)) for f in (0.2, 0.5, 0.8, 1.0)]
    assert sizes == sorted(sizes) and len(set(sizes)) == len(sizes)


def test_fraction_sample_deterministic_and_canonical(corpus_and_plan):
    ds, plan = corpus_and_plan
    views2 = materialize_split(ds, plan, 2, plan.seed)
    a = sample_fraction(views2.test, 0.5, plan.seed, 1, 2)
    b = sample_fraction(views2.test, 0.5, plan.seed, 1, 2)
    assert [r.id for r in a] == [r.id for r in b]
    assert [r.id for r in a] == sorted(r.id for r in a)


def test_self_label_never_reads_target_gold(corpus_and_plan):
    ds, plan = corpus_and_plan
    job = AdaptationJob(method="self-label", source=1, target=2, trainer=classifier(), seed=1, n=plan.n)

    seen_labels = []

    def snooping_labeler(records):
        seen_labels.extend(r.label for r in records)
        return ["alpha"] * len(records)

    self_label_adapt(ds, plan, job, METRIC, label_fn=snooping_labeler)
    assert seen_labels and all(lbl is None for lbl in seen_labels)


def test_pseudo_records_carry_taint(corpus_and_plan):
    ds, plan = corpus_and_plan
    views2 = materialize_split(ds, plan, 2, plan.seed)
    stripped = strip_labels(views2.test)
    assert all(r.taint == "stripped" for r in stripped)


def test_perfect_oracle_equivalence(corpus_and_plan):
    ds, plan = corpus_and_plan
    job = AdaptationJob(method="self-label", source=1, target=2, trainer=classifier(), seed=4, n=plan.n)
    gold_by_id = {r.id: r.label for r in ds.records}

    adapted = self_label_adapt(
        ds, plan, job, METRIC, label_fn=lambda recs: [gold_by_id[r.id] for r in recs]
    )

    views1 = materialize_split(ds, plan, 1, plan.seed)
    views2 = materialize_split(ds, plan, 2, plan.seed)
    portion = sample_fraction(views2.test, job.fraction, plan.seed, 1, 2)
    mixture = list(views1.train) + [
        r.stripped().with_label(gold_by_id[r.id]) for r in portion
    ]
    direct = train(job.trainer, mixture, views1.dev, METRIC, job.seed).with_split(job.target)
    assert adapted.to_bytes() == direct.to_bytes()


def test_cumulative_composition(corpus_and_plan):
    ds, plan = corpus_and_plan
    spec = classifier()
    job = AdaptationJob(method="self-label-cumulative", source=1, target=3, trainer=spec, seed=2, n=plan.n)
    artifact = cumulative_self_label_adapt(ds, plan, job, METRIC)
    assert artifact.training_split == 3

    # degenerate case j = s+1 equals plain self-labeling with fraction 1.0
    job2 = AdaptationJob(method="self-label-cumulative", source=1, target=2, trainer=spec, seed=2, n=plan.n)
    cum = cumulative_self_label_adapt(ds, plan, job2, METRIC)
    job3 = AdaptationJob(method="self-label", source=1, target=2, trainer=spec, seed=2, n=plan.n)
    single = self_label_adapt(ds, plan, job3, METRIC)
    assert cum.to_bytes() == single.to_bytes()


def test_cumulative_requires_first_split_source(corpus_and_plan):
    ds, plan = corpus_and_plan
    job = AdaptationJob(method="self-label-cumulative", source=2, target=3, trainer=classifier(), seed=0, n=plan.n)
    with pytest.raises(UsageError, match="first split"):
        cumulative_self_label_adapt(ds, plan, job, METRIC)


def test_continual_pretrain_rejects_builtins(corpus_and_plan):
    ds, plan = corpus_and_plan
    job = AdaptationJob(method="ft-pretrain-ft", source=1, target=2, trainer=classifier(), seed=0, n=plan.n)
    with pytest.raises(UnsupportedCapability):
        continual_pretrain_adapt(ds, plan, job, METRIC)


def test_continual_pretrain_transcripts(corpus_and_plan):
    ds, plan = corpus_and_plan
    spec = TrainerSpec.external([sys.executable, MOCK], supports_pretrain_phase=True)
    job = AdaptationJob(method="ft-pretrain-ft", source=1, target=2, trainer=spec, seed=0, n=plan.n)
    artifact = continual_pretrain_adapt(ds, plan, job, METRIC)
    try:
        assert artifact.phases == ("train(d_1)", "pretrain(d_2)", "train(d_1)")
    finally:
        artifact.parameters.close()

    job2 = AdaptationJob(method="pretrain-ft", source=1, target=2, trainer=spec, seed=0, n=plan.n)
    artifact2 = continual_pretrain_adapt(ds, plan, job2, METRIC)
    try:
        assert artifact2.phases == ("pretrain(d_2)", "train(d_1)")
    finally:
        artifact2.parameters.close()


def test_adaptation_grid_gold_is_standard_grid(corpus_and_plan):
    ds, plan = corpus_and_plan
    grid, scores = adaptation_grid(ds, plan, "gold", classifier(), seeds=(0,), metric=METRIC)
    assert grid.n == plan.n
    assert set(grid.cells) == {
        (i, j, 0) for i in range(1, plan.n) for j in range(i + 1, plan.n + 1)
    }
    assert scores.n == plan.n


def test_adaptation_grid_self_label_positive_on_drift(corpus_and_plan):
    ds, plan = corpus_and_plan
    grid, scores = adaptation_grid(ds, plan, "self-label", classifier(), seeds=(0,), metric=METRIC)
    assert scores["as_anchor"].score > 0


def test_cumulative_not_much_worse_than_single_step(corpus_and_plan):
    # adding older pseudo-labeled splits may not help, but it should not hurt
    # beyond a small tolerance (percent points on the anchor adaptation score)
    ds, plan = corpus_and_plan
    _, single = adaptation_grid(ds, plan, "self-label", classifier(), seeds=(0,), metric=METRIC)
    _, cumulative = adaptation_grid(
        ds, plan, "self-label-cumulative", classifier(), seeds=(0,), metric=METRIC
    )
    assert cumulative["as_anchor"].score >= single["as_anchor"].score - 2.0
