"""Transformer fine-tuning, masked-token pretraining and prediction.

Models are kept as state dicts in an in-process store keyed by model id.
Phase continuity works through the shared encoder: a train or pretrain
request carrying a parent model id starts from that model's encoder weights
(task heads are task-specific and rebuilt). Encoder transfer uses
strict=False loading because pooler/head layers legitimately differ between
the masked-LM and classification architectures.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

import torch
from transformers import (
    AutoModelForMaskedLM,
    AutoModelForSequenceClassification,
    AutoModelForTokenClassification,
    AutoTokenizer,
)

from .config import AdapterConfig

CLASSIFICATION = "classification"
SEQUENCE_LABELING = "sequence-labeling"


@dataclass
class ModelEntry:
    task: Optional[str]
    labels: Optional[list]
    model_state: Optional[dict]
    encoder_state: dict
    phases: list = field(default_factory=list)


class Engine:
    def __init__(self, config: AdapterConfig):
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.store: dict[str, ModelEntry] = {}
        self._next = 0

    # -- store ------------------------------------------------------------

    def _new_id(self) -> str:
        self._next += 1
        return f"m{self._next}"

    def _parent(self, model_id) -> Optional[ModelEntry]:
        if model_id is None:
            return None
        entry = self.store.get(str(model_id))
        if entry is None:
            raise KeyError(f"unknown model_id {model_id}")
        return entry

    def phases(self, model_id) -> list:
        entry = self.store.get(str(model_id))
        if entry is None:
            raise KeyError(f"unknown model_id {model_id}")
        return list(entry.phases)

    # -- encoding ---------------------------------------------------------

    def _encode_tokens(self, token_lists):
        return self.tokenizer(
            [list(t) for t in token_lists],
            is_split_into_words=True,
            truncation=True,
            max_length=self.config.max_length,
            padding=True,
            return_tensors="pt",
        )

    def _task_model(self, task: str, num_labels: int, parent: Optional[ModelEntry]):
        if task == CLASSIFICATION:
            model = AutoModelForSequenceClassification.from_pretrained(
                self.config.model, num_labels=num_labels
            )
        elif task == SEQUENCE_LABELING:
            model = AutoModelForTokenClassification.from_pretrained(
                self.config.model, num_labels=num_labels
            )
        else:
            raise ValueError(f"unknown task {task!r}")
        if parent is not None:
            model.base_model.load_state_dict(parent.encoder_state, strict=False)
        return model.to(self.config.device)

    # -- training ---------------------------------------------------------

    def train(self, task: str, seed: int, train_records: list, dev_records: list,
              hparams: dict, parent_id=None) -> tuple:
        if not train_records:
            raise ValueError("train set is empty")
        if not dev_records:
            raise ValueError("dev set is empty")
        config = self.config.override(hparams)
        parent = self._parent(parent_id)
        torch.manual_seed(seed)

        label_key = "label" if task == CLASSIFICATION else "tags"
        if task == CLASSIFICATION:
            labels = sorted({r["label"] for r in train_records} | {r["label"] for r in dev_records})
        elif task == SEQUENCE_LABELING:
            labels = sorted(
                {t for r in train_records for t in r["tags"]}
                | {t for r in dev_records for t in r["tags"]}
            )
        else:
            raise ValueError(f"unknown task {task!r}")
        for r in list(train_records) + list(dev_records):
            if label_key not in r:
                raise ValueError(f"record {r.get('id')} has no {label_key}")
        label_index = {l: i for i, l in enumerate(labels)}

        model = self._task_model(task, len(labels), parent)
        optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr)

        order = list(range(len(train_records)))
        rng = random.Random(seed)
        best_score = -1.0
        best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        stale = 0
        for _epoch in range(config.max_epochs):
            model.train()
            rng.shuffle(order)
            for start in range(0, len(order), config.batch_size):
                batch = [train_records[k] for k in order[start : start + config.batch_size]]
                loss = self._batch_loss(model, task, batch, label_index)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            score = self._dev_accuracy(model, task, dev_records, labels)
            if score > best_score:
                best_score = score
                best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break

        model.load_state_dict(best_state)
        mid = self._new_id()
        self.store[mid] = ModelEntry(
            task=task,
            labels=labels,
            model_state=best_state,
            encoder_state={k: v.detach().clone() for k, v in model.base_model.state_dict().items()},
            phases=(list(parent.phases) if parent else []) + ["train"],
        )
        return mid, best_score

    def _batch_loss(self, model, task, batch, label_index):
        enc = self._encode_tokens([r["tokens"] for r in batch])
        if task == CLASSIFICATION:
            targets = torch.tensor([label_index[r["label"]] for r in batch])
            out = model(**enc.to(self.config.device), labels=targets.to(self.config.device))
            return out.loss
        seq_len = enc["input_ids"].shape[1]
        targets = torch.full((len(batch), seq_len), -100, dtype=torch.long)
        for i, r in enumerate(batch):
            seen = set()
            for pos, wid in enumerate(enc.word_ids(i)):
                if wid is None or wid in seen:
                    continue
                seen.add(wid)
                targets[i, pos] = label_index[r["tags"][wid]]
        out = model(**enc.to(self.config.device), labels=targets.to(self.config.device))
        return out.loss

    # -- evaluation / prediction -------------------------------------------

    def _predict_batched(self, model, task, records, labels):
        model.eval()
        out = []
        with torch.no_grad():
            for start in range(0, len(records), self.config.batch_size):
                batch = records[start : start + self.config.batch_size]
                enc = self._encode_tokens([r["tokens"] for r in batch])
                logits = model(**enc.to(self.config.device)).logits
                if task == CLASSIFICATION:
                    for row in logits.argmax(dim=-1).tolist():
                        out.append(labels[row])
                    continue
                ids = logits.argmax(dim=-1).tolist()
                for i, r in enumerate(batch):
                    n_words = len(r["tokens"])
                    tags = ["O"] * n_words  # words lost to truncation stay outside
                    seen = set()
                    for pos, wid in enumerate(enc.word_ids(i)):
                        if wid is None or wid in seen:
                            continue
                        seen.add(wid)
                        tags[wid] = labels[ids[i][pos]]
                    out.append(tags)
        return out

    def _dev_accuracy(self, model, task, dev_records, labels) -> float:
        preds = self._predict_batched(model, task, dev_records, labels)
        if task == CLASSIFICATION:
            hits = sum(1 for p, r in zip(preds, dev_records) if p == r["label"])
            return hits / len(dev_records)
        total = hits = 0
        for p, r in zip(preds, dev_records):
            for a, b in zip(p, r["tags"]):
                hits += a == b
                total += 1
        return hits / total if total else 0.0

    def predict(self, model_id, records: list) -> list:
        entry = self._parent(model_id)
        if entry.task is None or entry.model_state is None:
            raise ValueError(f"model {model_id} has no task head; fine-tune it before predicting")
        model = self._task_model(entry.task, len(entry.labels), None)
        model.load_state_dict(entry.model_state)
        return self._predict_batched(model, entry.task, records, entry.labels)

    # -- masked-token pretraining -------------------------------------------

    def pretrain(self, parent_id, texts: list) -> str:
        if not texts:
            raise ValueError("pretrain needs a non-empty text list")
        parent = self._parent(parent_id)
        torch.manual_seed(0)
        model = AutoModelForMaskedLM.from_pretrained(self.config.model)
        if parent is not None:
            model.base_model.load_state_dict(parent.encoder_state, strict=False)
        model = model.to(self.config.device)
        model.train()
        optimizer = torch.optim.AdamW(model.parameters(), lr=self.config.lr)
        mask_id = self.tokenizer.mask_token_id
        if mask_id is None:
            raise ValueError("tokenizer has no mask token; cannot run the masked-token objective")

        for _epoch in range(self.config.max_epochs):
            for start in range(0, len(texts), self.config.batch_size):
                batch = [str(t) for t in texts[start : start + self.config.batch_size]]
                enc = self.tokenizer(
                    batch, truncation=True, max_length=self.config.max_length,
                    padding=True, return_tensors="pt",
                )
                input_ids = enc["input_ids"].clone()
                labels = enc["input_ids"].clone()
                special = torch.tensor(
                    [
                        self.tokenizer.get_special_tokens_mask(row, already_has_special_tokens=True)
                        for row in enc["input_ids"].tolist()
                    ],
                    dtype=torch.bool,
                )
                maskable = enc["attention_mask"].bool() & ~special
                chance = torch.full(labels.shape, self.config.mlm_probability)
                masked = torch.bernoulli(chance).bool() & maskable
                if not masked.any() and maskable.any():
                    # force one masked position so the loss is defined
                    first = maskable.nonzero()[0]
                    masked[first[0], first[1]] = True
                labels[~masked] = -100
                input_ids[masked] = mask_id
                enc["input_ids"] = input_ids
                out = model(**enc.to(self.config.device), labels=labels.to(self.config.device))
                optimizer.zero_grad()
                out.loss.backward()
                optimizer.step()

        mid = self._new_id()
        self.store[mid] = ModelEntry(
            task=parent.task if parent else None,
            labels=parent.labels if parent else None,
            model_state=None,  # the task head does not survive a pretrain phase
            encoder_state={k: v.detach().clone() for k, v in model.base_model.state_dict().items()},
            phases=(list(parent.phases) if parent else []) + ["pretrain"],
        )
        return mid
