"""Adapter configuration: model source, training loop knobs, device."""

from __future__ import annotations

import argparse
from dataclasses import dataclass


@dataclass(frozen=True)
class AdapterConfig:
    model: str  # hub name or local path
    max_epochs: int = 5
    lr: float = 5e-4
    batch_size: int = 16
    patience: int = 2
    device: str = "cpu"
    mlm_probability: float = 0.15
    max_length: int = 64

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if not 0.0 < self.mlm_probability < 1.0:
            raise ValueError("mlm_probability must be in (0, 1)")

    def override(self, hparams: dict) -> "AdapterConfig":
        """Per-request hyperparameters win over the process defaults."""
        known = {
            "epochs": ("max_epochs", int),
            "max_epochs": ("max_epochs", int),
            "lr": ("lr", float),
            "batch_size": ("batch_size", int),
            "patience": ("patience", int),
            "mlm_probability": ("mlm_probability", float),
            "max_length": ("max_length", int),
        }
        updates = {}
        for key, raw in (hparams or {}).items():
            if key in known:
                field, cast = known[key]
                updates[field] = cast(raw)
        if not updates:
            return self
        values = self.__dict__ | updates
        return AdapterConfig(**values)


def parse_args(argv=None) -> AdapterConfig:
    parser = argparse.ArgumentParser(prog="hf-trainer-adapter")
    parser.add_argument("--model", required=True, help="model name or local path")
    parser.add_argument("--max-epochs", type=int, default=5)
    parser.add_argument("--lr", type=float, default=5e-4)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--patience", type=int, default=2)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--mlm-probability", type=float, default=0.15)
    parser.add_argument("--max-length", type=int, default=64)
    args = parser.parse_args(argv)
    return AdapterConfig(
        model=args.model,
        max_epochs=args.max_epochs,
        lr=args.lr,
        batch_size=args.batch_size,
        patience=args.patience,
        device=args.device,
        mlm_probability=args.mlm_probability,
        max_length=args.max_length,
    )
