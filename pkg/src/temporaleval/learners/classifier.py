"""Linear text classifier over hashed bag-of-token and bigram features.

Feature hashing uses crc32 with distinct salts for the bucket index and the
sign, so artifacts are identical across platforms (Python's builtin hash is
salted per process and never used here). Training is plain per-example SGD
on the multinomial logistic loss with an epoch-level dev check; the weights
of the best dev epoch are what the artifact stores.
"""

from __future__ import annotations

import io
import json
import zlib
from typing import Sequence

import numpy as np

from ..records import TaskMetricKind, TimestampedRecord
from ..seeding import derive_rng
from .base import ModelArtifact, TrainerSpec, evaluate_predictions


def _hash_feature(feature: str, mask: int) -> tuple:
    data = feature.encode("utf-8")
    index = zlib.crc32(b"i|" + data) & mask
    sign = 1.0 if zlib.crc32(b"s|" + data) & 1 else -1.0
    return index, sign


def _features(tokens: Sequence[str], mask: int, bigrams: bool) -> tuple:
    acc: dict[int, float] = {}
    for tok in tokens:
        idx, sign = _hash_feature("u|" + tok, mask)
        acc[idx] = acc.get(idx, 0.0) + sign
    if bigrams:
        for a, b in zip(tokens, tokens[1:]):
            idx, sign = _hash_feature("b|" + a + "|" + b, mask)
            acc[idx] = acc.get(idx, 0.0) + sign
    items = sorted(acc.items())
    return (
        np.array([i for i, _ in items], dtype=np.int64),
        np.array([v for _, v in items], dtype=np.float64),
    )


def _featurize_all(records: Sequence[TimestampedRecord], mask: int, bigrams: bool) -> list:
    return [_features(r.tokens, mask, bigrams) for r in records]


def _predict_featurized(weights: np.ndarray, bias: np.ndarray, feats: list, classes: list) -> list:
    labels = []
    for idx, val in feats:
        scores = val @ weights[idx] + bias
        labels.append(classes[int(np.argmax(scores))])
    return labels


def train_classifier(
    spec: TrainerSpec,
    train_records: Sequence[TimestampedRecord],
    dev_records: Sequence[TimestampedRecord],
    metric: TaskMetricKind,
    seed: int,
) -> ModelArtifact:
    hash_bits = spec.hp_int("hash_bits", 18)
    lr = spec.hp_float("lr", 0.25)
    max_epochs = spec.hp_int("epochs", 20)
    patience = spec.hp_int("patience", 3)
    bigrams = spec.hp_int("bigram", 1) != 0

    mask = (1 << hash_bits) - 1
    classes = sorted({r.label for r in train_records} | {r.label for r in dev_records})
    class_index = {c: k for k, c in enumerate(classes)}
    inventory = frozenset(classes)

    train_feats = _featurize_all(train_records, mask, bigrams)
    dev_feats = _featurize_all(dev_records, mask, bigrams)
    targets = [class_index[r.label] for r in train_records]

    n_classes = len(classes)
    weights = np.zeros((mask + 1, n_classes), dtype=np.float64)
    bias = np.zeros(n_classes, dtype=np.float64)

    best_score = -1.0
    best_weights = weights.copy()
    best_bias = bias.copy()
    epochs_since_best = 0

    rng = derive_rng(seed, "classifier-epochs")
    order = list(range(len(train_records)))
    for _epoch in range(max_epochs):
        rng.shuffle(order)
        for k in order:
            idx, val = train_feats[k]
            z = val @ weights[idx] + bias
            z -= z.max()
            p = np.exp(z)
            p /= p.sum()
            p[targets[k]] -= 1.0
            weights[idx] -= lr * val[:, None] * p[None, :]
            bias -= lr * p

        preds = _predict_featurized(weights, bias, dev_feats, classes)
        score = evaluate_predictions(dev_records, preds, metric, inventory=inventory)
        if score > best_score:
            best_score = score
            best_weights = weights.copy()
            best_bias = bias.copy()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= patience:
                break

    params = _serialize(classes, hash_bits, bigrams, best_weights, best_bias)
    return ModelArtifact(
        trainer=spec, parameters=params, training_split=-1, seed=seed, dev_score=best_score
    )


def _serialize(classes, hash_bits, bigrams, weights, bias) -> bytes:
    header = json.dumps(
        {"classes": classes, "hash_bits": hash_bits, "bigram": int(bigrams)}, sort_keys=True
    ).encode("utf-8")
    buf = io.BytesIO()
    buf.write(len(header).to_bytes(4, "big"))
    buf.write(header)
    # float64 little-endian raw buffers; shapes are implied by header fields
    buf.write(np.ascontiguousarray(weights, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(bias, dtype="<f8").tobytes())
    return buf.getvalue()


def _deserialize(params: bytes) -> tuple:
    hlen = int.from_bytes(params[:4], "big")
    header = json.loads(params[4 : 4 + hlen].decode("utf-8"))
    classes = header["classes"]
    mask = (1 << header["hash_bits"]) - 1
    n = (mask + 1) * len(classes)
    body = params[4 + hlen :]
    weights = np.frombuffer(body[: n * 8], dtype="<f8").reshape(mask + 1, len(classes))
    bias = np.frombuffer(body[n * 8 :], dtype="<f8")
    return classes, mask, bool(header["bigram"]), weights, bias


def predict_classifier(artifact: ModelArtifact, records: Sequence[TimestampedRecord]) -> list:
    classes, mask, bigrams, weights, bias = _deserialize(artifact.parameters)
    feats = _featurize_all(records, mask, bigrams)
    return _predict_featurized(weights, bias, feats, classes)
