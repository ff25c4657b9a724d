"""Equal-size temporal splits with downsampling and the 80-20 train/dev protocol.

Consecutive period keys are grouped into n bins; every bin is downsampled
(seeded, without replacement) to the size of the smallest bin, so no split
is advantaged by data volume. Each split is later divided 80-20 into train
and dev; the full split doubles as the test set for earlier models. Dev
data always comes from the training split's own time period.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import DataError, UsageError
from .records import TemporalDataset, TimestampedRecord, record_sort_key
from .seeding import derive_rng


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SplitPlan:
    """Which record ids belong to which temporal split (1-based indices)."""

    n: int
    period_map: Mapping[int, int]
    per_split_size: int
    seed: int
    periods_per_split: int
    split_record_ids: tuple  # tuple of per-split ordered id tuples

    def ids_for(self, t: int) -> tuple:
        if not 1 <= t <= self.n:
            raise UsageError(f"split index {t} out of range 1..{self.n}")
        return self.split_record_ids[t - 1]

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "per_split_size": self.per_split_size,
            "seed": self.seed,
            "periods_per_split": self.periods_per_split,
            "period_map": {str(k): v for k, v in sorted(self.period_map.items())},
            "split_record_ids": [list(ids) for ids in self.split_record_ids],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        doc = json.loads(text)
        return cls(
            n=doc["n"],
            period_map={int(k): v for k, v in doc["period_map"].items()},
            per_split_size=doc["per_split_size"],
            seed=doc["seed"],
            periods_per_split=doc.get("periods_per_split", 1),
            split_record_ids=tuple(tuple(ids) for ids in doc["split_record_ids"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SplitPlan":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class SplitViews:
    """Train/dev/test views of one temporal split."""

    t: int
    train: tuple
    dev: tuple
    test: tuple

    def __post_init__(self):
        got = len(self.train) + len(self.dev)
        if got != len(self.test):
            raise DataError(f"split {self.t}: train+dev has {got} records, test has {len(self.test)}")


def plan_splits(dataset: TemporalDataset, periods_per_split: int, seed: int) -> SplitPlan:
    """Group consecutive periods into splits and downsample all to the smallest."""
    if periods_per_split < 1:
        raise UsageError("periods_per_split must be >= 1")
    periods = dataset.periods
    bins = [periods[i : i + periods_per_split] for i in range(0, len(periods), periods_per_split)]
    n = len(bins)
    if n < 3:
        raise DataError(f"only {n} temporal splits; need at least 3 (train, adaptation target, test)")

    period_map = {}
    for t, chunk in enumerate(bins, start=1):
        for p in chunk:
            period_map[p] = t

    by_split: dict[int, list[TimestampedRecord]] = {t: [] for t in range(1, n + 1)}
    for r in dataset.records:
        by_split[period_map[r.timestamp]].append(r)
    sizes = {t: len(rs) for t, rs in by_split.items()}
    if min(sizes.values()) == 0:
        empty = [t for t, s in sizes.items() if s == 0]
        raise DataError(f"splits {empty} have zero records")

    target = min(sizes.values())
    split_ids = []
    for t in range(1, n + 1):
        recs = by_split[t]
        if len(recs) > target:
            rng = derive_rng(seed, "downsample", t)
            recs = rng.sample(recs, target)
        recs = sorted(recs, key=record_sort_key)
        split_ids.append(tuple(r.id for r in recs))

    return SplitPlan(
        n=n,
        period_map=period_map,
        per_split_size=target,
        seed=seed,
        periods_per_split=periods_per_split,
        split_record_ids=tuple(split_ids),
    )


def materialize_split(dataset: TemporalDataset, plan: SplitPlan, t: int, seed: int) -> SplitViews:
    """80-20 train/dev views of split t; the full split is the test view."""
    ids = plan.ids_for(t)
    by_id = {r.id: r for r in dataset.records}
    try:
        recs = [by_id[i] for i in ids]
    except KeyError as exc:
        raise DataError(f"plan references unknown record id {exc}")
    test = tuple(sorted(recs, key=record_sort_key))

    shuffled = list(test)
    derive_rng(seed, "train-dev", t).shuffle(shuffled)
    n_train = round_half_up(0.8 * len(shuffled))
    return SplitViews(t=t, train=tuple(shuffled[:n_train]), dev=tuple(shuffled[n_train:]), test=test)
