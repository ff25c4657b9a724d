"""Timestamped labeled records, dataset construction and the JSONL corpus format.

A corpus file is UTF-8, one JSON object per line:
  classification:    {"id", "timestamp", "tokens": [...], "label": "..."}
  sequence labeling: {"id", "timestamp", "tokens": [...], "tags": [...]}

Datasets are immutable after construction and always hold records in the
canonical (timestamp, id) order, so identical inputs produce identical
datasets regardless of line order in the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import DataError

Label = Union[str, tuple]  # class name, or per-token BIO tag tuple


class Task(Enum):
    CLASSIFICATION = "classification"
    SEQUENCE_LABELING = "sequence-labeling"


@dataclass(frozen=True)
class TaskMetricKind:
    """Which task metric fills grid cells: span micro-F1, one-class F1 or macro-F1."""

    kind: str  # "span-micro-f1" | "class-f1" | "macro-f1"
    target: Optional[str] = None

    KINDS = ("span-micro-f1", "class-f1", "macro-f1")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DataError(f"unknown metric kind {self.kind!r}")
        if self.kind == "class-f1" and not self.target:
            raise DataError("class-f1 requires a target class")
        if self.kind != "class-f1" and self.target is not None:
            raise DataError(f"{self.kind} takes no target class")

    @classmethod
    def span_micro_f1(cls) -> "TaskMetricKind":
        return cls("span-micro-f1")

    @classmethod
    def class_f1(cls, target: str) -> "TaskMetricKind":
        return cls("class-f1", target)

    @classmethod
    def macro_f1(cls) -> "TaskMetricKind":
        return cls("macro-f1")

    @property
    def task(self) -> Task:
        return Task.SEQUENCE_LABELING if self.kind == "span-micro-f1" else Task.CLASSIFICATION

    def check_compatible(self, dataset: "TemporalDataset") -> None:
        if self.task is not dataset.task:
            raise DataError(f"metric {self.kind} does not apply to {dataset.task.value} data")
        if self.kind == "class-f1" and self.target not in dataset.label_inventory:
            raise DataError(f"target class {self.target!r} not in label inventory")

    def spec_string(self) -> str:
        return f"{self.kind}:{self.target}" if self.target else self.kind

    @classmethod
    def parse(cls, text: str) -> "TaskMetricKind":
        kind, _, target = text.partition(":")
        return cls(kind, target or None)


def split_tag(tag: str) -> tuple[str, Optional[str]]:
    """Split a BIO tag into (prefix, span type); "O" maps to ("O", None)."""
    if tag == "O":
        return ("O", None)
    if len(tag) > 2 and tag[1] == "-" and tag[0] in ("B", "I"):
        return (tag[0], tag[2:])
    raise DataError(f"tag {tag!r} is not O, B-X or I-X")


@dataclass(frozen=True)
class TimestampedRecord:
    """One labeled unit (sentence or document) with its period key.

    ``taint`` is None for gold records; label-stripped views carry
    "stripped" and pseudo-labeled copies carry "self-labeled", so adaptation
    code can be audited for never touching gold labels of target periods.
    """

    id: str
    timestamp: int
    tokens: tuple
    label: Optional[Label]
    meta: Optional[Mapping[str, str]] = None
    taint: Optional[str] = None

    def __post_init__(self):
        if not self.tokens:
            raise DataError(f"record {self.id}: tokens must be non-empty")
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if isinstance(self.label, (list, tuple)):
            object.__setattr__(self, "label", tuple(self.label))

    @property
    def task(self) -> Task:
        return Task.SEQUENCE_LABELING if isinstance(self.label, tuple) else Task.CLASSIFICATION

    def stripped(self) -> "TimestampedRecord":
        """Label-free view of this record for adaptation targets."""
        return replace(self, label=None, taint="stripped")

    def with_label(self, label: Label, taint: Optional[str] = "self-labeled") -> "TimestampedRecord":
        rec = replace(self, label=label, taint=taint)
        if isinstance(label, (list, tuple)) and len(label) != len(self.tokens):
            raise DataError(f"record {self.id}: {len(label)} tags for {len(self.tokens)} tokens")
        return rec


def record_sort_key(record: TimestampedRecord) -> tuple:
    return (record.timestamp, record.id)


@dataclass(frozen=True)
class TemporalDataset:
    """An ordered, validated collection of records for one task."""

    task: Task
    records: tuple
    label_inventory: frozenset
    period_range: tuple

    @classmethod
    def build(
        cls,
        task: Task,
        records: Iterable[TimestampedRecord],
        label_inventory: Optional[Iterable[str]] = None,
    ) -> "TemporalDataset":
        recs = tuple(sorted(records, key=record_sort_key))
        if not recs:
            raise DataError("dataset has no records")
        inventory = frozenset(label_inventory) if label_inventory is not None else observed_labels(task, recs)
        ds = cls(
            task=task,
            records=recs,
            label_inventory=inventory,
            period_range=(recs[0].timestamp, max(r.timestamp for r in recs)),
        )
        problems = validate(ds)
        if problems:
            raise DataError("; ".join(problems[:5]) + ("" if len(problems) <= 5 else f" (+{len(problems) - 5} more)"))
        return ds

    @property
    def periods(self) -> tuple:
        return tuple(sorted({r.timestamp for r in self.records}))

    def records_for_period(self, period: int) -> tuple:
        return tuple(r for r in self.records if r.timestamp == period)


def observed_labels(task: Task, records: Sequence[TimestampedRecord]) -> frozenset:
    """Class names, or span type names for sequence labeling."""
    out = set()
    for r in records:
        if r.label is None:
            continue
        if task is Task.CLASSIFICATION:
            out.add(r.label)
        else:
            for tag in r.label:
                prefix, stype = split_tag(tag)
                if stype is not None:
                    out.add(stype)
    return frozenset(out)


def validate(dataset: TemporalDataset) -> list:
    """All invariant violations, one entry per offending record; [] when clean."""
    problems = []
    lo, hi = dataset.period_range
    for r in dataset.records:
        if not r.tokens:
            problems.append(f"record {r.id}: empty tokens")
            continue
        if not (lo <= r.timestamp <= hi):
            problems.append(f"record {r.id}: timestamp {r.timestamp} outside period range {dataset.period_range}")
            continue
        if r.label is None:
            continue
        is_seq = isinstance(r.label, tuple)
        if is_seq != (dataset.task is Task.SEQUENCE_LABELING):
            problems.append(f"record {r.id}: label kind does not match {dataset.task.value} task")
            continue
        if is_seq:
            if len(r.label) != len(r.tokens):
                problems.append(f"record {r.id}: {len(r.label)} tags for {len(r.tokens)} tokens")
                continue
            try:
                types = {split_tag(t)[1] for t in r.label} - {None}
            except DataError as exc:
                problems.append(f"record {r.id}: {exc}")
                continue
            extra = types - dataset.label_inventory
            if extra:
                problems.append(f"record {r.id}: span types {sorted(extra)} not in inventory")
        else:
            if r.label not in dataset.label_inventory:
                problems.append(f"record {r.id}: label {r.label!r} not in inventory")
    return problems


def truncate_tokens(dataset: TemporalDataset, k: int) -> TemporalDataset:
    """Keep each record's first k tokens. Classification only; labels unchanged."""
    if k < 1:
        raise DataError("k must be >= 1")
    if dataset.task is Task.SEQUENCE_LABELING:
        raise DataError("truncate_tokens would desynchronize tags on sequence-labeling data")
    recs = [replace(r, tokens=r.tokens[:k]) for r in dataset.records]
    return TemporalDataset.build(dataset.task, recs, dataset.label_inventory)


def _record_from_obj(obj: Mapping, task: Task, line_no: int) -> TimestampedRecord:
    try:
        rid = str(obj["id"])
        timestamp = int(obj["timestamp"])
        tokens = list(obj["tokens"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"line {line_no}: missing or malformed field ({exc})")
    if not tokens or not all(isinstance(t, str) for t in tokens):
        raise DataError(f"line {line_no}: tokens must be a non-empty list of strings")
    meta = obj.get("meta")
    if task is Task.CLASSIFICATION:
        if "label" not in obj:
            raise DataError(f"line {line_no}: classification record needs a label")
        label: Label = str(obj["label"])
    else:
        if "tags" not in obj:
            raise DataError(f"line {line_no}: sequence record needs tags")
        tags = list(obj["tags"])
        if len(tags) != len(tokens):
            raise DataError(f"label/token length mismatch at line {line_no}")
        for tag in tags:
            split_tag(tag)  # raises on unknown scheme
        label = tuple(tags)
    return TimestampedRecord(id=rid, timestamp=timestamp, tokens=tuple(tokens), label=label, meta=meta)


def ingest(path, task: Task) -> TemporalDataset:
    """Read a JSONL corpus file and return a validated dataset."""
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {line_no}: invalid JSON ({exc.msg})")
            records.append(_record_from_obj(obj, task, line_no))
    if not records:
        raise DataError(f"{path}: no records")
    return TemporalDataset.build(task, records)


def record_to_obj(record: TimestampedRecord) -> dict:
    obj = {"id": record.id, "timestamp": record.timestamp, "tokens": list(record.tokens)}
    if isinstance(record.label, tuple):
        obj["tags"] = list(record.label)
    elif record.label is not None:
        obj["label"] = record.label
    if record.meta:
        obj["meta"] = dict(record.meta)
    return obj


def emit(dataset: TemporalDataset, path) -> None:
    """Write the dataset in the line-delimited format; ingest(emit(d)) == d."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for r in dataset.records:
            fh.write(json.dumps(record_to_obj(r), ensure_ascii=False) + "\n")
