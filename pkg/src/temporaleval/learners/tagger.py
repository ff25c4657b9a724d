"""Averaged structured perceptron tagger with transition-constrained decoding.

Emission features per token: identity, lowercased form, character shape and
prefixes/suffixes up to length 3. Decoding is Viterbi over the tag lattice
where I-X may only follow B-X or I-X of the same type, so built-in
predictions never contain orphan continuation tags.
"""

from __future__ import annotations

import io
import json
from typing import Sequence

import numpy as np

from ..records import TaskMetricKind, TimestampedRecord, split_tag
from ..seeding import derive_rng
from .base import ModelArtifact, TrainerSpec, evaluate_predictions

NEG_INF = -1e30


def token_shape(token: str) -> str:
    out = []
    for ch in token:
        if ch.isupper():
            out.append("X")
        elif ch.islower():
            out.append("x")
        elif ch.isdigit():
            out.append("d")
        else:
            out.append(ch)
    return "".join(out)


def token_features(token: str) -> list:
    lower = token.lower()
    feats = [f"w|{token}", f"lw|{lower}", f"sh|{token_shape(token)}"]
    for k in (1, 2, 3):
        if len(token) >= k:
            feats.append(f"p{k}|{lower[:k]}")
            feats.append(f"s{k}|{lower[-k:]}")
    return feats


def tag_states(tag_sequences: Sequence[Sequence[str]]) -> list:
    types = sorted({split_tag(t)[1] for seq in tag_sequences for t in seq} - {None})
    return ["O"] + [f"B-{t}" for t in types] + [f"I-{t}" for t in types]


def transition_mask(states: Sequence[str]) -> np.ndarray:
    """allowed[prev, cur]; row len(states) is the start-of-sentence pseudo state."""
    n = len(states)
    allowed = np.ones((n + 1, n), dtype=bool)
    for cur, tag in enumerate(states):
        prefix, stype = split_tag(tag)
        if prefix != "I":
            continue
        for prev in range(n + 1):
            if prev == n:
                allowed[prev, cur] = False  # sentence may not start inside a span
                continue
            p_prefix, p_type = split_tag(states[prev])
            allowed[prev, cur] = p_type == stype and p_prefix in ("B", "I")
    return allowed


class _Weights:
    """Perceptron weights with the running-sum averaging trick."""

    def __init__(self, n_features: int, n_states: int):
        self.emission = np.zeros((n_features, n_states), dtype=np.float64)
        self.transition = np.zeros((n_states + 1, n_states), dtype=np.float64)
        self._em_acc = np.zeros_like(self.emission)
        self._tr_acc = np.zeros_like(self.transition)
        self.step = 0

    def bump(self, feat_rows: Sequence[int], state: int, delta: float) -> None:
        for f in feat_rows:
            self.emission[f, state] += delta
            self._em_acc[f, state] += self.step * delta

    def bump_transition(self, prev: int, cur: int, delta: float) -> None:
        self.transition[prev, cur] += delta
        self._tr_acc[prev, cur] += self.step * delta

    def averaged(self) -> tuple:
        if self.step == 0:
            return self.emission.copy(), self.transition.copy()
        em = self.emission - self._em_acc / self.step
        tr = self.transition - self._tr_acc / self.step
        return em, tr


def _viterbi(emission_scores: np.ndarray, transition: np.ndarray, allowed: np.ndarray) -> list:
    """emission_scores: (L, S); transition: (S+1, S). Returns state indices."""
    length, n_states = emission_scores.shape
    trans = np.where(allowed, transition, NEG_INF)
    back = np.zeros((length, n_states), dtype=np.int64)
    score = trans[n_states] + emission_scores[0]
    for i in range(1, length):
        cand = score[:, None] + trans[:n_states]
        back[i] = np.argmax(cand, axis=0)
        score = cand[back[i], np.arange(n_states)] + emission_scores[i]
    path = [int(np.argmax(score))]
    for i in range(length - 1, 0, -1):
        path.append(int(back[i, path[-1]]))
    return path[::-1]


def _sentence_rows(tokens: Sequence[str], feature_index: dict) -> list:
    rows = []
    for tok in tokens:
        rows.append([feature_index[f] for f in token_features(tok) if f in feature_index])
    return rows


def _emission_matrix(rows: list, emission: np.ndarray, n_states: int) -> np.ndarray:
    scores = np.zeros((len(rows), n_states), dtype=np.float64)
    for i, fr in enumerate(rows):
        if fr:
            scores[i] = emission[fr].sum(axis=0)
    return scores


def train_tagger(
    spec: TrainerSpec,
    train_records: Sequence[TimestampedRecord],
    dev_records: Sequence[TimestampedRecord],
    metric: TaskMetricKind,
    seed: int,
) -> ModelArtifact:
    max_epochs = spec.hp_int("epochs", 15)
    patience = spec.hp_int("patience", 3)

    states = tag_states([r.label for r in train_records] + [r.label for r in dev_records])
    state_index = {s: k for k, s in enumerate(states)}
    allowed = transition_mask(states)
    n_states = len(states)

    feature_index: dict[str, int] = {}
    for r in train_records:
        for tok in r.tokens:
            for f in token_features(tok):
                if f not in feature_index:
                    feature_index[f] = len(feature_index)

    train_rows = [_sentence_rows(r.tokens, feature_index) for r in train_records]
    gold_paths = [[state_index[t] for t in r.label] for r in train_records]
    dev_rows = [_sentence_rows(r.tokens, feature_index) for r in dev_records]

    w = _Weights(len(feature_index), n_states)
    best_score = -1.0
    best = w.averaged()
    epochs_since_best = 0

    rng = derive_rng(seed, "tagger-epochs")
    order = list(range(len(train_records)))
    for _epoch in range(max_epochs):
        rng.shuffle(order)
        for k in order:
            w.step += 1
            rows = train_rows[k]
            gold = gold_paths[k]
            em = _emission_matrix(rows, w.emission, n_states)
            pred = _viterbi(em, w.transition, allowed)
            if pred == gold:
                continue
            prev_g = prev_p = n_states  # start pseudo state
            for i, (g, p) in enumerate(zip(gold, pred)):
                if g != p:
                    w.bump(rows[i], g, +1.0)
                    w.bump(rows[i], p, -1.0)
                if (prev_g, g) != (prev_p, p):
                    w.bump_transition(prev_g, g, +1.0)
                    w.bump_transition(prev_p, p, -1.0)
                prev_g, prev_p = g, p

        em_avg, tr_avg = w.averaged()
        preds = _decode_all(dev_rows, em_avg, tr_avg, allowed, states)
        score = evaluate_predictions(dev_records, preds, metric)
        if score > best_score:
            best_score = score
            best = (em_avg, tr_avg)
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= patience:
                break

    params = _serialize(list(feature_index), states, best[0], best[1])
    return ModelArtifact(
        trainer=spec, parameters=params, training_split=-1, seed=seed, dev_score=best_score
    )


def _decode_all(rows_per_sentence, emission, transition, allowed, states) -> list:
    out = []
    for rows in rows_per_sentence:
        em = _emission_matrix(rows, emission, len(states))
        path = _viterbi(em, transition, allowed)
        out.append(tuple(states[s] for s in path))
    return out


def _serialize(features, states, emission, transition) -> bytes:
    header = json.dumps({"features": features, "states": states}, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(len(header).to_bytes(4, "big"))
    buf.write(header)
    buf.write(np.ascontiguousarray(emission, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(transition, dtype="<f8").tobytes())
    return buf.getvalue()


def _deserialize(params: bytes) -> tuple:
    hlen = int.from_bytes(params[:4], "big")
    header = json.loads(params[4 : 4 + hlen].decode("utf-8"))
    features = header["features"]
    states = header["states"]
    n_f, n_s = len(features), len(states)
    body = params[4 + hlen :]
    emission = np.frombuffer(body[: n_f * n_s * 8], dtype="<f8").reshape(n_f, n_s)
    transition = np.frombuffer(body[n_f * n_s * 8 :], dtype="<f8").reshape(n_s + 1, n_s)
    return features, states, emission, transition


def predict_tagger(artifact: ModelArtifact, records: Sequence[TimestampedRecord]) -> list:
    features, states, emission, transition = _deserialize(artifact.parameters)
    feature_index = {f: i for i, f in enumerate(features)}
    allowed = transition_mask(states)
    rows = [_sentence_rows(r.tokens, feature_index) for r in records]
    return _decode_all(rows, emission, transition, allowed, states)
