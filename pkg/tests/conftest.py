from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from temporaleval.records import Task, TemporalDataset, TimestampedRecord


def make_classification_records(n_per_period=10, periods=(2014, 2015, 2016), labels=("pos", "neg")):
    records = []
    for p_idx, period in enumerate(periods):
        for k in range(n_per_period):
            records.append(
                TimestampedRecord(
                    id=f"y{period}-{k:03d}",
                    timestamp=period,
                    tokens=(f"tok{k}", f"tok{k + 1}", "common"),
                    label=labels[(k + p_idx) % len(labels)],
                )
            )
    return records


@pytest.fixture
def small_classification_dataset():
    return TemporalDataset.build(Task.CLASSIFICATION, make_classification_records())


@pytest.fixture
def small_tagging_dataset():
    records = []
    for period in (2014, 2015, 2016):
        for k in range(8):
            records.append(
                TimestampedRecord(
                    id=f"y{period}-{k:03d}",
                    timestamp=period,
                    tokens=("John", "visited", "Paris", "today"),
                    label=("B-PER", "O", "B-LOC", "O"),
                )
            )
    return TemporalDataset.build(Task.SEQUENCE_LABELING, records)
