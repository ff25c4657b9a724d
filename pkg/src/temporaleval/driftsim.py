"""Synthetic timestamped corpora with controllable temporal drift.

Each label owns a pool of indicative words per period; at every period
transition a churn fraction of each pool is replaced with words never seen
before, while a shared background vocabulary stays fixed. Records mix
indicative words (signal) with background words (noise), so a model trained
on one period gradually loses access to the signal of later periods. This
is the minimal mechanism that produces grids with the qualitative
deterioration/adaptation patterns of real temporal corpora.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import DataError, UsageError
from .records import Task, TemporalDataset, TimestampedRecord
from .seeding import derive_rng


@dataclass(frozen=True)
class DriftConfig:
    task: Task = Task.CLASSIFICATION
    periods: int = 6
    records_per_period: int = 2000
    vocab_size: int = 2000
    churn: float = 0.3
    label_prior_drift: float = 0.0
    labels: tuple = ("alpha", "beta")
    tokens_per_record: tuple = (8, 16)
    seed: int = 0
    indicative_per_label: int = 20
    signal_rate: float = 0.65

    def __post_init__(self):
        if self.periods < 3:
            raise UsageError("periods must be >= 3")
        if self.records_per_period < 1:
            raise UsageError("records_per_period must be >= 1")
        for name in ("churn", "label_prior_drift", "signal_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise UsageError(f"{name} must be in [0, 1]")
        if len(self.labels) < 2:
            raise UsageError("need at least two labels")
        lo, hi = self.tokens_per_record
        if not 1 <= lo <= hi:
            raise UsageError("tokens_per_record must be an increasing positive range")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "tokens_per_record", (int(lo), int(hi)))

    @property
    def replaced_per_transition(self) -> int:
        return round(self.churn * self.indicative_per_label)

    def required_vocab(self) -> int:
        fresh = self.indicative_per_label + (self.periods - 1) * self.replaced_per_transition
        return len(self.labels) * fresh + 1  # at least one background word

    @classmethod
    def from_file(cls, path) -> "DriftConfig":
        """Flat key=value config; '#' starts a comment."""
        values = {}
        for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{line_no}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        kwargs = {}
        for key, value in values.items():
            if key == "task":
                kwargs["task"] = Task(value)
            elif key == "labels":
                kwargs["labels"] = tuple(x.strip() for x in value.split(",") if x.strip())
            elif key == "tokens_per_record":
                lo, _, hi = value.partition("-")
                kwargs["tokens_per_record"] = (int(lo), int(hi))
            elif key in ("churn", "label_prior_drift", "signal_rate"):
                kwargs[key] = float(value)
            elif key in ("periods", "records_per_period", "vocab_size", "seed", "indicative_per_label"):
                kwargs[key] = int(value)
            else:
                raise DataError(f"{path}: unknown config key {key!r}")
        return cls(**kwargs)


def _indicative_pools(config: DriftConfig, words: list) -> dict:
    """pools[label][period] -> list of indicative words, with churn between periods."""
    m = config.indicative_per_label
    r = config.replaced_per_transition
    next_fresh = [0]

    def take(count: int) -> list:
        start = next_fresh[0]
        next_fresh[0] += count
        return words[start : start + count]

    pools: dict[str, list] = {}
    for label in config.labels:
        current = take(m)
        per_period = [list(current)]
        for t in range(1, config.periods):
            rng = derive_rng(config.seed, "churn", label, t)
            replace_at = rng.sample(range(m), r) if r else []
            fresh = take(r)
            current = list(current)
            for pos, w in zip(sorted(replace_at), fresh):
                current[pos] = w
            per_period.append(current)
        pools[label] = per_period
    return pools


def _priors(config: DriftConfig) -> list:
    k = len(config.labels)
    priors = [[1.0 / k] * k]
    d = config.label_prior_drift
    for t in range(1, config.periods):
        if d == 0.0:
            priors.append(priors[-1])
            continue
        rng = derive_rng(config.seed, "prior", t)
        q = [rng.random() for _ in range(k)]
        total_q = sum(q)
        q = [x / total_q for x in q]
        mixed = [(1 - d) * p + d * x for p, x in zip(priors[-1], q)]
        total = sum(mixed)
        priors.append([x / total for x in mixed])
    return priors


def _label_sequence(rng, prior: list, count: int) -> list:
    """Label indices in exact largest-remainder proportions, shuffled.

    Exact quotas keep realized class balance identical across periods (up to
    prior drift), so a zero-drift corpus has no per-period difficulty luck.
    """
    quotas = [p * count for p in prior]
    counts = [int(q) for q in quotas]
    remainders = sorted(range(len(prior)), key=lambda i: quotas[i] - counts[i], reverse=True)
    for i in remainders[: count - sum(counts)]:
        counts[i] += 1
    sequence = [i for i, c in enumerate(counts) for _ in range(c)]
    rng.shuffle(sequence)
    return sequence


def generate(config: DriftConfig) -> TemporalDataset:
    """Deterministic synthetic corpus for the configured drift parameters."""
    if config.vocab_size < config.required_vocab():
        raise DataError(
            f"vocab_size {config.vocab_size} too small: {len(config.labels)} labels with "
            f"{config.indicative_per_label} indicative words and churn {config.churn} over "
            f"{config.periods} periods need at least {config.required_vocab()} words"
        )
    width = len(str(config.vocab_size))
    indicative_budget = config.required_vocab() - 1
    words = [f"w{i:0{width}d}" for i in range(config.vocab_size)]
    background = words[indicative_budget:]
    pools = _indicative_pools(config, words)
    priors = _priors(config)

    records = []
    lo, hi = config.tokens_per_record
    for t in range(1, config.periods + 1):
        rng = derive_rng(config.seed, "records", t)
        label_order = _label_sequence(rng, priors[t - 1], config.records_per_period)
        # record lengths cycle through the range so every period has the same
        # length profile; order is shuffled to avoid id/length coupling
        lengths = [lo + k % (hi - lo + 1) for k in range(config.records_per_period)]
        rng.shuffle(lengths)
        for k in range(config.records_per_period):
            label_i = label_order[k]
            label = config.labels[label_i]
            length = lengths[k]
            rid = f"t{t:03d}-{k:06d}"
            if config.task is Task.CLASSIFICATION:
                tokens = []
                pool = pools[label][t - 1]
                for _ in range(length):
                    if rng.random() < config.signal_rate:
                        tokens.append(rng.choice(pool))
                    else:
                        tokens.append(rng.choice(background))
                records.append(TimestampedRecord(id=rid, timestamp=t, tokens=tuple(tokens), label=label))
            else:
                records.append(_tagging_record(rng, rid, t, length, label_i, config, pools, background))
    return TemporalDataset.build(config.task, records, config.labels)


def _tagging_record(rng, rid, t, length, first_label_i, config, pools, background) -> TimestampedRecord:
    n_spans = rng.randint(1, 2)
    span_labels = [config.labels[first_label_i]]
    if n_spans == 2:
        span_labels.append(rng.choice(config.labels))
    span_lens = [rng.randint(1, 2) for _ in span_labels]
    while sum(span_lens) + len(span_lens) > length:  # keep at least one O between/around
        if span_lens[-1] > 1:
            span_lens[-1] -= 1
        else:
            span_labels.pop()
            span_lens.pop()
    tokens: list = []
    tags: list = []
    gaps = len(span_labels) + 1
    slack = length - sum(span_lens)
    cuts = sorted(rng.randint(0, slack) for _ in range(gaps - 1))
    gap_sizes = []
    prev = 0
    for c in cuts:
        gap_sizes.append(c - prev)
        prev = c
    gap_sizes.append(slack - prev)
    for g, size in enumerate(gap_sizes):
        for _ in range(size):
            tokens.append(rng.choice(background))
            tags.append("O")
        if g < len(span_labels):
            label = span_labels[g]
            pool = pools[label][t - 1]
            for i in range(span_lens[g]):
                tokens.append(rng.choice(pool))
                tags.append(("B-" if i == 0 else "I-") + label)
    return TimestampedRecord(id=rid, timestamp=t, tokens=tuple(tokens), label=tuple(tags))


@dataclass(frozen=True)
class DriftReport:
    periods: tuple
    counts: Mapping[int, int]
    label_priors: Mapping[int, Mapping[str, float]]
    vocab_overlap: Mapping[tuple, float]  # (period_a, period_b) -> Jaccard

    def to_text(self) -> str:
        lines = ["period  records  " + "  ".join(f"J({p})" for p in self.periods)]
        for a in self.periods:
            row = [f"{a:<7d}", f"{self.counts[a]:<8d}"]
            row += [f"{self.vocab_overlap[(a, b)]:.3f}" for b in self.periods]
            lines.append(" ".join(row))
        lines.append("")
        for a in self.periods:
            dist = "  ".join(f"{lbl}={p:.3f}" for lbl, p in sorted(self.label_priors[a].items()))
            lines.append(f"priors {a}: {dist}")
        return "\n".join(lines)


def describe(dataset: TemporalDataset) -> DriftReport:
    """Empirical per-period vocabulary overlap, label priors and counts."""
    periods = dataset.periods
    vocab: dict[int, set] = {p: set() for p in periods}
    counts: dict[int, int] = {p: 0 for p in periods}
    label_counts: dict[int, dict] = {p: {} for p in periods}
    for r in dataset.records:
        vocab[r.timestamp].update(r.tokens)
        counts[r.timestamp] += 1
        if isinstance(r.label, tuple):
            for tag in r.label:
                if tag.startswith("B-"):
                    lc = label_counts[r.timestamp]
                    lc[tag[2:]] = lc.get(tag[2:], 0) + 1
        elif r.label is not None:
            lc = label_counts[r.timestamp]
            lc[r.label] = lc.get(r.label, 0) + 1
    overlap = {}
    for a in periods:
        for b in periods:
            union = vocab[a] | vocab[b]
            overlap[(a, b)] = len(vocab[a] & vocab[b]) / len(union) if union else 1.0
    priors = {}
    for p in periods:
        total = sum(label_counts[p].values()) or 1
        priors[p] = {lbl: c / total for lbl, c in label_counts[p].items()}
    return DriftReport(periods=periods, counts=counts, label_priors=priors, vocab_overlap=overlap)
