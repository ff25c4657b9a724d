"""Trainable models that fill grid cells: built-ins and the external trainer protocol."""

from .base import (
    ModelArtifact,
    TrainerSpec,
    evaluate_predictions,
    predict,
    pretrain_phase,
    train,
)
from .external import ExternalModelHandle, ExternalTrainerClient

__all__ = [
    "TrainerSpec",
    "ModelArtifact",
    "train",
    "predict",
    "pretrain_phase",
    "evaluate_predictions",
    "ExternalTrainerClient",
    "ExternalModelHandle",
]
