"""Label-free temporal adaptation: self-labeling and continual pre-training.

Information hygiene rules enforced here:
  - gold labels of the target split are never read: targets are passed
    through label-stripped views (taint "stripped"), and pseudo-labeled
    copies carry taint "self-labeled";
  - development data for adapted models comes only from the source split,
    never from the noisy target.

Adapted models occupy grid column j (their target split) and are evaluated
on rows k > j, so adaptation scores are computed against the gold
anchor-trained column with the same machinery as gold retraining.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .errors import DataError, UsageError
from .learners import ModelArtifact, TrainerSpec, evaluate_predictions, predict, pretrain_phase, train
from .learners.external import ExternalTrainerClient, train_external
from .records import TaskMetricKind, TemporalDataset, TimestampedRecord, record_sort_key
from .seeding import derive_rng
from .splits import SplitPlan, SplitViews, materialize_split, round_half_up
from .summary import EvaluationGrid, SummaryScores, summarize_grid

SELF_LABEL = "self-label"
SELF_LABEL_CUMULATIVE = "self-label-cumulative"
PRETRAIN_FT = "pretrain-ft"
FT_PRETRAIN_FT = "ft-pretrain-ft"
GOLD_RETRAIN = "gold"

METHODS = (GOLD_RETRAIN, SELF_LABEL, SELF_LABEL_CUMULATIVE, PRETRAIN_FT, FT_PRETRAIN_FT)


@dataclass(frozen=True)
class AdaptationJob:
    """One adaptation run: adapt a source-split model to a later target split."""

    method: str
    source: int
    target: int
    trainer: TrainerSpec
    seed: int
    fraction: float = 1.0
    n: int = 0  # total split count, for bounds checking when known

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown adaptation method {self.method!r}")
        if not 0.0 < self.fraction <= 1.0:
            raise UsageError("fraction must be in (0, 1]")
        if self.target <= self.source:
            raise UsageError("target split must be later than the source split")
        if self.n and not (1 <= self.source < self.target <= self.n - 1):
            raise UsageError(
                f"need source < target <= n-1 so the adapted model still has future test rows; "
                f"got source={self.source} target={self.target} n={self.n}"
            )


def strip_labels(records: Sequence[TimestampedRecord]) -> list:
    return [r.stripped() for r in records]


def sample_fraction(
    records: Sequence[TimestampedRecord], fraction: float, seed: int, *tags
) -> list:
    """Seeded uniform subset of round(fraction * len) records, canonical order."""
    if not 0.0 < fraction <= 1.0:
        raise UsageError("fraction must be in (0, 1]")
    if fraction == 1.0:
        return sorted(records, key=record_sort_key)
    count = round_half_up(fraction * len(records))
    rng = derive_rng(seed, "fraction", *tags)
    chosen = rng.sample(list(records), count)
    return sorted(chosen, key=record_sort_key)


def pseudo_label(
    base: ModelArtifact, unlabeled: Sequence[TimestampedRecord]
) -> list:
    """Label stripped records with the base model's predictions."""
    for r in unlabeled:
        if r.label is not None:
            raise DataError(f"record {r.id} still carries a label; pass stripped views")
    predictions = predict(base, unlabeled)
    return [r.with_label(lbl, taint="self-labeled") for r, lbl in zip(unlabeled, predictions)]


def _views(dataset: TemporalDataset, plan: SplitPlan, t: int) -> SplitViews:
    return materialize_split(dataset, plan, t, plan.seed)


def self_label_adapt(
    dataset: TemporalDataset,
    plan: SplitPlan,
    job: AdaptationJob,
    metric: TaskMetricKind,
    label_fn: Optional[Callable] = None,
) -> ModelArtifact:
    """Train on source gold, pseudo-label a fraction of the target, retrain on the mixture.

    ``label_fn`` exists for oracle checks: it replaces the base model as the
    labeler (records -> labels). Default is the base model's predictions.
    """
    if job.method != SELF_LABEL:
        raise UsageError(f"self_label_adapt cannot run method {job.method!r}")
    src = _views(dataset, plan, job.source)
    tgt = _views(dataset, plan, job.target)

    base = train(job.trainer, src.train, src.dev, metric, job.seed)
    portion = sample_fraction(tgt.test, job.fraction, plan.seed, job.source, job.target)
    stripped = strip_labels(portion)
    if label_fn is None:
        pseudo = pseudo_label(base, stripped)
    else:
        labels = label_fn(stripped)
        pseudo = [r.with_label(lbl, taint="self-labeled") for r, lbl in zip(stripped, labels)]

    mixture = list(src.train) + pseudo
    final = train(job.trainer, mixture, src.dev, metric, job.seed)
    return final.with_split(job.target)


def cumulative_self_label_adapt(
    dataset: TemporalDataset,
    plan: SplitPlan,
    job: AdaptationJob,
    metric: TaskMetricKind,
) -> ModelArtifact:
    """Pseudo-label every split between source and target and train on all of it."""
    if job.source != 1:
        raise UsageError("cumulative self-labeling starts from the first split")
    src = _views(dataset, plan, job.source)
    base = train(job.trainer, src.train, src.dev, metric, job.seed)

    mixture = list(src.train)
    for t in range(job.source + 1, job.target + 1):
        views_t = _views(dataset, plan, t)
        portion = sample_fraction(views_t.test, job.fraction, plan.seed, job.source, t)
        mixture.extend(pseudo_label(base, strip_labels(portion)))
    final = train(job.trainer, mixture, src.dev, metric, job.seed)
    return final.with_split(job.target)


def gold_retrain(
    dataset: TemporalDataset,
    plan: SplitPlan,
    t: int,
    trainer: TrainerSpec,
    metric: TaskMetricKind,
    seed: int,
) -> ModelArtifact:
    """The standard grid cell model: trained on the split's own gold data."""
    views = _views(dataset, plan, t)
    return train(trainer, views.train, views.dev, metric, seed).with_split(t)


def continual_pretrain_adapt(
    dataset: TemporalDataset,
    plan: SplitPlan,
    job: AdaptationJob,
    metric: TaskMetricKind,
) -> ModelArtifact:
    """Run a pretrain-bearing pipeline through the external trainer protocol.

    pretrain-ft:     pretrain on target text, then fine-tune on source gold.
    ft-pretrain-ft:  fine-tune on source gold, pretrain on target text,
                     fine-tune on source gold again.
    """
    if job.method not in (PRETRAIN_FT, FT_PRETRAIN_FT):
        raise UsageError(f"continual_pretrain_adapt cannot run method {job.method!r}")
    if not job.trainer.supports_pretrain_phase:
        # Built-ins land here too; never silently skip the phase.
        pretrain_phase(job.trainer, [])  # raises UnsupportedCapability
    src = _views(dataset, plan, job.source)
    tgt = _views(dataset, plan, job.target)
    texts = [" ".join(r.tokens) for r in strip_labels(tgt.test)]

    transcript = []
    client = ExternalTrainerClient.for_spec(job.trainer)
    try:
        caps = client.hello()
        if not caps.get("supports_pretrain_phase"):
            raise DataError("trainer spec claims pretrain support but hello denies it")
        hparams = dict(job.trainer.hyperparams)
        hparams["metric"] = metric.spec_string()
        model_id = None
        if job.method == FT_PRETRAIN_FT:
            model_id, _ = client.train_model(metric.task, job.seed, src.train, src.dev, hparams)
            transcript.append(f"train(d_{job.source})")
        model_id = client.pretrain_model(model_id, texts)
        transcript.append(f"pretrain(d_{job.target})")
        artifact = train_external(
            job.trainer, src.train, src.dev, metric, job.seed, client=client, model_id=model_id
        )
        transcript.append(f"train(d_{job.source})")
    except Exception:
        client.close()
        raise
    artifact.parameters.owns_client = True
    return artifact.with_split(job.target).with_phases(transcript)


def adapt(
    dataset: TemporalDataset,
    plan: SplitPlan,
    job: AdaptationJob,
    metric: TaskMetricKind,
) -> ModelArtifact:
    if job.method == GOLD_RETRAIN:
        return gold_retrain(dataset, plan, job.target, job.trainer, metric, job.seed)
    if job.method == SELF_LABEL:
        return self_label_adapt(dataset, plan, job, metric)
    if job.method == SELF_LABEL_CUMULATIVE:
        return cumulative_self_label_adapt(dataset, plan, job, metric)
    return continual_pretrain_adapt(dataset, plan, job, metric)


def adaptation_grid(
    dataset: TemporalDataset,
    plan: SplitPlan,
    method: str,
    trainer: TrainerSpec,
    seeds: Sequence[int],
    metric: TaskMetricKind,
    alpha: float = 0.05,
    fraction: float = 1.0,
) -> tuple:
    """Fill a grid whose column j holds the model adapted from d_1 to d_j.

    Column 1 is always the gold model trained on the first split, so the
    anchor-based adaptation score compares each method against it exactly as
    gold retraining is scored. Returns (EvaluationGrid, SummaryScores).
    """
    if method not in METHODS:
        raise UsageError(f"unknown adaptation method {method!r}")
    n = plan.n
    cells = {}
    for seed in seeds:
        for j in range(1, n):
            if j == 1 or method == GOLD_RETRAIN:
                artifact = gold_retrain(dataset, plan, j, trainer, metric, seed)
            else:
                job = AdaptationJob(
                    method=method, source=1, target=j, trainer=trainer,
                    seed=seed, fraction=fraction, n=n,
                )
                artifact = adapt(dataset, plan, job, metric)
            try:
                for k in range(j + 1, n + 1):
                    test = _views(dataset, plan, k).test
                    preds = predict(artifact, strip_labels(test))
                    value = evaluate_predictions(test, preds, metric, inventory=dataset.label_inventory)
                    cells[(j, k, seed)] = value * 100.0
            finally:
                params = artifact.parameters
                if hasattr(params, "close"):
                    params.close()
    grid = EvaluationGrid(n=n, seeds=tuple(seeds), cells=cells)
    return grid, summarize_grid(grid, alpha=alpha)
