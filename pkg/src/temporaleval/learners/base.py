"""Trainer specification, model artifacts and the train/predict entry points.

A TrainerSpec names either a built-in learner or an external command that
speaks the newline-delimited JSON protocol (see external.py). Training is
deterministic given (spec, data, seed): two identical calls produce
byte-identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from ..errors import DataError, UnsupportedCapability, UsageError
from ..metrics import class_f1, extract_spans, macro_f1, span_micro_f1
from ..records import Task, TaskMetricKind, TimestampedRecord

BUILTIN_CLASSIFIER = "builtin-classifier"
BUILTIN_TAGGER = "builtin-tagger"
EXTERNAL = "external"


@dataclass(frozen=True)
class TrainerSpec:
    """How to train a model: which learner, its hyperparameters, its capabilities."""

    kind: str
    command: tuple = ()
    hyperparams: tuple = ()  # sorted (key, value) string pairs
    supports_pretrain_phase: bool = False

    def __post_init__(self):
        if self.kind not in (BUILTIN_CLASSIFIER, BUILTIN_TAGGER, EXTERNAL):
            raise UsageError(f"unknown trainer kind {self.kind!r}")
        if self.kind == EXTERNAL and not self.command:
            raise UsageError("external trainer needs a non-empty command")
        if self.kind != EXTERNAL and self.supports_pretrain_phase:
            raise UsageError("built-in trainers do not support a pretrain phase")
        object.__setattr__(self, "command", tuple(self.command))
        pairs = dict(self.hyperparams)
        object.__setattr__(
            self, "hyperparams", tuple(sorted((str(k), str(v)) for k, v in pairs.items()))
        )

    @classmethod
    def builtin_classifier(cls, **hparams) -> "TrainerSpec":
        return cls(kind=BUILTIN_CLASSIFIER, hyperparams=tuple(hparams.items()))

    @classmethod
    def builtin_tagger(cls, **hparams) -> "TrainerSpec":
        return cls(kind=BUILTIN_TAGGER, hyperparams=tuple(hparams.items()))

    @classmethod
    def external(cls, command: Sequence[str], supports_pretrain_phase: bool = False, **hparams) -> "TrainerSpec":
        return cls(
            kind=EXTERNAL,
            command=tuple(command),
            hyperparams=tuple(hparams.items()),
            supports_pretrain_phase=supports_pretrain_phase,
        )

    def hp(self, name: str, default: str) -> str:
        return dict(self.hyperparams).get(name, default)

    def hp_int(self, name: str, default: int) -> int:
        return int(self.hp(name, str(default)))

    def hp_float(self, name: str, default: float) -> float:
        return float(self.hp(name, str(default)))

    def describe(self) -> str:
        doc = {"kind": self.kind, "command": list(self.command), "hyperparams": dict(self.hyperparams)}
        return json.dumps(doc, sort_keys=True)


@dataclass(frozen=True)
class ModelArtifact:
    """A trained model: serialized parameters (built-ins) or an external handle."""

    trainer: TrainerSpec
    parameters: object  # bytes for built-ins, ExternalModelHandle otherwise
    training_split: int
    seed: int
    dev_score: float
    phases: tuple = ()  # phase transcript for multi-phase adaptation pipelines

    def with_split(self, t: int) -> "ModelArtifact":
        return replace(self, training_split=t)

    def with_phases(self, phases: Sequence[str]) -> "ModelArtifact":
        return replace(self, phases=tuple(phases))

    def to_bytes(self) -> bytes:
        """Canonical serialization; only defined for built-in artifacts."""
        if not isinstance(self.parameters, bytes):
            raise UsageError("external artifacts have no byte serialization")
        header = json.dumps(
            {
                "trainer": self.trainer.describe(),
                "training_split": self.training_split,
                "seed": self.seed,
                "dev_score": repr(self.dev_score),
                "phases": list(self.phases),
            },
            sort_keys=True,
        ).encode("utf-8")
        return len(header).to_bytes(4, "big") + header + self.parameters


def check_training_inputs(train: Sequence[TimestampedRecord], dev: Sequence[TimestampedRecord], task: Task) -> None:
    if not train:
        raise DataError("training set is empty")
    if not dev:
        raise DataError("dev set is empty")
    for r in list(train) + list(dev):
        if r.label is None:
            raise DataError(f"record {r.id} has no label; cannot train on stripped views")
        if r.task is not task:
            raise DataError(f"record {r.id} does not match task {task.value}")


def evaluate_predictions(
    gold: Sequence[TimestampedRecord],
    predicted: Sequence,
    metric: TaskMetricKind,
    inventory: Optional[frozenset] = None,
) -> float:
    """Score predictions against gold records with the configured task metric."""
    if len(gold) != len(predicted):
        raise DataError(f"{len(gold)} records but {len(predicted)} predictions")
    if metric.kind == "span-micro-f1":
        gold_spans = [extract_spans(r.label) for r in gold]
        pred_spans = [extract_spans(tags) for tags in predicted]
        return span_micro_f1(gold_spans, pred_spans).value
    gold_labels = [r.label for r in gold]
    if metric.kind == "class-f1":
        return class_f1(gold_labels, list(predicted), metric.target).value
    return macro_f1(gold_labels, list(predicted), inventory=inventory).value


def train(
    spec: TrainerSpec,
    train_records: Sequence[TimestampedRecord],
    dev_records: Sequence[TimestampedRecord],
    metric: TaskMetricKind,
    seed: int,
) -> ModelArtifact:
    """Train per spec; the checkpoint that scores best on dev is returned."""
    check_training_inputs(train_records, dev_records, metric.task)
    if spec.kind == BUILTIN_CLASSIFIER:
        from .classifier import train_classifier

        if metric.task is not Task.CLASSIFICATION:
            raise DataError("builtin-classifier handles classification tasks only")
        return train_classifier(spec, train_records, dev_records, metric, seed)
    if spec.kind == BUILTIN_TAGGER:
        from .tagger import train_tagger

        if metric.task is not Task.SEQUENCE_LABELING:
            raise DataError("builtin-tagger handles sequence-labeling tasks only")
        return train_tagger(spec, train_records, dev_records, metric, seed)
    from .external import train_external

    return train_external(spec, train_records, dev_records, metric, seed)


def predict(artifact: ModelArtifact, records: Sequence[TimestampedRecord]) -> list:
    """One class label, or one BIO tag tuple, per record."""
    if not records:
        return []
    if artifact.trainer.kind == BUILTIN_CLASSIFIER:
        from .classifier import predict_classifier

        return predict_classifier(artifact, records)
    if artifact.trainer.kind == BUILTIN_TAGGER:
        from .tagger import predict_tagger

        return predict_tagger(artifact, records)
    from .external import predict_external

    return predict_external(artifact, records)


def pretrain_phase(artifact_or_spec, texts: Sequence[str]):
    """Run the trainer's unsupervised objective; built-ins reject cleanly."""
    spec = artifact_or_spec.trainer if isinstance(artifact_or_spec, ModelArtifact) else artifact_or_spec
    if not spec.supports_pretrain_phase:
        raise UnsupportedCapability(f"trainer {spec.kind} does not support a pretrain phase")
    from .external import pretrain_external

    return pretrain_external(artifact_or_spec, texts)
