"""Temporal model deterioration and adaptation measurement.

Build equal-size temporal splits from a timestamped labeled corpus, fill the
lower-triangular train-by-test evaluation grid, compute deterioration and
adaptation summary scores with exact Wilcoxon significance, and run
label-free adaptation (self-labeling and continual pre-training pipelines).
"""

from .driftsim import DriftConfig, describe, generate
from .errors import (
    DataError,
    IncompleteGridError,
    ProtocolError,
    TrainerError,
    UnsupportedCapability,
    UsageError,
)
from .gridio import load_grid, read_grid_csv, render_matrix, write_grid_csv
from .learners import ModelArtifact, TrainerSpec, predict, pretrain_phase, train
from .metrics import MetricValue, SpanAnnotation, class_f1, extract_spans, macro_f1, span_micro_f1
from .records import (
    Task,
    TaskMetricKind,
    TemporalDataset,
    TimestampedRecord,
    emit,
    ingest,
    truncate_tokens,
    validate,
)
from .splits import SplitPlan, SplitViews, materialize_split, plan_splits
from .stats import WilcoxonResult, wilcoxon_signed_rank
from .summary import (
    EvaluationGrid,
    SummaryScores,
    adaptation_anchor,
    adaptation_consecutive,
    deterioration_anchor,
    deterioration_consecutive,
    salient_values,
    seed_extremes,
    summarize_grid,
)

__version__ = "0.1.0"
