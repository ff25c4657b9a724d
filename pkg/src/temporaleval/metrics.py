"""Task metrics: span-level micro-F1, single-class F1 and macro-F1.

Conventions (documented because they show up in reports):
  - BIO decoding is lenient: an I-X with no live span of type X opens a new
    span rather than being discarded.
  - F1 of a class absent from both gold and prediction is 1.0 ("both empty");
    any other zero denominator gives 0.0.
Values are kept at full precision in [0, 1]; multiply by 100 and round only
at presentation time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .errors import DataError
from .records import split_tag


@dataclass(frozen=True, order=True)
class SpanAnnotation:
    """Half-open token span [start, end) of one type."""

    start: int
    end: int
    label: str

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise DataError(f"bad span bounds ({self.start}, {self.end})")


@dataclass(frozen=True)
class MetricValue:
    """A metric in [0, 1] together with the per-class counts behind it."""

    value: float
    counts: Mapping[str, tuple]  # class -> (tp, fp, fn)

    def percent(self, decimals: int = 1) -> float:
        return round(self.value * 100.0, decimals)


def extract_spans(tags: Sequence[str]) -> set:
    """Maximal BIO spans; orphan I- tags start a new span (lenient decoding)."""
    spans = set()
    start = None
    current = None
    for i, tag in enumerate(tags):
        prefix, stype = split_tag(tag)
        if prefix == "O":
            if current is not None:
                spans.add(SpanAnnotation(start, i, current))
                current = None
        elif prefix == "B" or current != stype:
            if current is not None:
                spans.add(SpanAnnotation(start, i, current))
            start, current = i, stype
    if current is not None:
        spans.add(SpanAnnotation(start, len(tags), current))
    return spans


def spans_to_tags(spans: Iterable[SpanAnnotation], length: int) -> tuple:
    """Inverse of extract_spans for non-overlapping spans."""
    tags = ["O"] * length
    for s in spans:
        if s.end > length:
            raise DataError(f"span {s} exceeds sentence length {length}")
        tags[s.start] = f"B-{s.label}"
        for i in range(s.start + 1, s.end):
            tags[i] = f"I-{s.label}"
    return tuple(tags)


def _f1(tp: int, fp: int, fn: int) -> float:
    if tp == fp == fn == 0:
        return 1.0  # both empty
    if tp + fp == 0 or tp + fn == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def span_micro_f1(gold: Sequence[set], pred: Sequence[set]) -> MetricValue:
    """Exact-match span micro-F1 over all classes, sentence-aligned."""
    if len(gold) != len(pred):
        raise DataError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    counts: dict[str, list] = {}
    for g, p in zip(gold, pred):
        for span in p:
            c = counts.setdefault(span.label, [0, 0, 0])
            if span in g:
                c[0] += 1
            else:
                c[1] += 1
        for span in g - set(p):
            counts.setdefault(span.label, [0, 0, 0])[2] += 1
    tp = sum(c[0] for c in counts.values())
    fp = sum(c[1] for c in counts.values())
    fn = sum(c[2] for c in counts.values())
    return MetricValue(value=_f1(tp, fp, fn), counts={k: tuple(v) for k, v in sorted(counts.items())})


def class_f1(gold: Sequence[str], pred: Sequence[str], target: str) -> MetricValue:
    """Binary F1 with `target` as the positive class."""
    if not gold:
        raise DataError("empty input")
    if len(gold) != len(pred):
        raise DataError(f"{len(gold)} gold labels vs {len(pred)} predicted")
    tp = fp = fn = 0
    for g, p in zip(gold, pred):
        if p == target and g == target:
            tp += 1
        elif p == target:
            fp += 1
        elif g == target:
            fn += 1
    return MetricValue(value=_f1(tp, fp, fn), counts={target: (tp, fp, fn)})


def macro_f1(gold: Sequence[str], pred: Sequence[str], inventory: Optional[Iterable[str]] = None) -> MetricValue:
    """Unweighted mean of per-class F1 over the label inventory.

    Classes absent from both gold and prediction contribute 1.0 under the
    both-empty convention; pass the observed inventory to avoid that.
    """
    if not gold:
        raise DataError("empty input")
    if len(gold) != len(pred):
        raise DataError(f"{len(gold)} gold labels vs {len(pred)} predicted")
    classes = sorted(inventory) if inventory is not None else sorted(set(gold) | set(pred))
    if not classes:
        raise DataError("empty label inventory")
    counts = {}
    total = 0.0
    for c in classes:
        mv = class_f1(gold, pred, c)
        counts[c] = mv.counts[c]
        total += mv.value
    return MetricValue(value=total / len(classes), counts=counts)


def metric_consistent(mv: MetricValue, kind: str) -> bool:
    """Re-derive the value from counts; used to audit MetricValue invariants."""
    if kind == "macro-f1":
        vals = [_f1(*c) for c in mv.counts.values()]
        return abs(mv.value - sum(vals) / len(vals)) < 1e-12
    tp = sum(c[0] for c in mv.counts.values())
    fp = sum(c[1] for c in mv.counts.values())
    fn = sum(c[2] for c in mv.counts.values())
    return abs(mv.value - _f1(tp, fp, fn)) < 1e-12
