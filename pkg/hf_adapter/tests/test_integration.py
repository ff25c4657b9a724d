"""Byte-compatibility with the harness client: the adapter is driven here by
the temporaleval package itself rather than by raw JSON lines."""

from __future__ import annotations

import sys

import pytest

temporaleval = pytest.importorskip("temporaleval")

from temporaleval.adaptation import AdaptationJob, continual_pretrain_adapt
from temporaleval.driftsim import DriftConfig, generate
from temporaleval.learners import ExternalTrainerClient, TrainerSpec, predict, pretrain_phase, train
from temporaleval.records import TaskMetricKind
from temporaleval.splits import plan_splits


def adapter_spec(tiny_model_dir, **hp):
    return TrainerSpec.external(
        [sys.executable, "-m", "hf_trainer_adapter.serve", "--model", tiny_model_dir,
         "--max-epochs", "1", "--batch-size", "32"],
        supports_pretrain_phase=True,
        **hp,
    )


@pytest.fixture(scope="module")
def corpus():
    return generate(
        DriftConfig(periods=3, records_per_period=700, vocab_size=400, churn=0.2, seed=4,
                    tokens_per_record=(4, 8))
    )


def test_pretrain_phase_on_two_thousand_records(tiny_model_dir, corpus):
    spec = adapter_spec(tiny_model_dir)
    texts = [" ".join(r.tokens) for r in corpus.records][:2000]
    artifact = pretrain_phase(spec, texts)
    try:
        assert artifact.parameters.model_id
    finally:
        artifact.parameters.close()


def test_train_predict_roundtrip_via_client(tiny_model_dir, corpus):
    spec = adapter_spec(tiny_model_dir)
    metric = TaskMetricKind.macro_f1()
    records = list(corpus.records)[:120]
    artifact = train(spec, records[:90], records[90:], metric, seed=0)
    try:
        assert 0.0 <= artifact.dev_score <= 1.0
        preds = predict(artifact, [r.stripped() for r in records[:25]])
        assert len(preds) == 25
        assert set(preds) <= set(corpus.label_inventory)
    finally:
        artifact.parameters.close()


def test_three_phase_pipeline_through_adaptation_module(tiny_model_dir, corpus):
    plan = plan_splits(corpus, 1, seed=0)
    spec = adapter_spec(tiny_model_dir)
    job = AdaptationJob(method="ft-pretrain-ft", source=1, target=2, trainer=spec, seed=0, n=plan.n)
    artifact = continual_pretrain_adapt(corpus, plan, job, TaskMetricKind.macro_f1())
    try:
        assert artifact.phases == ("train(d_1)", "pretrain(d_2)", "train(d_1)")
        assert artifact.training_split == 2
    finally:
        artifact.parameters.close()


def test_capability_advertised_to_client(tiny_model_dir):
    spec = adapter_spec(tiny_model_dir)
    with ExternalTrainerClient.for_spec(spec) as client:
        assert client.hello()["supports_pretrain_phase"] is True
