"""Evaluation grid and the four temporal summary scores.

The grid holds the task metric M[i][j] measured on test split j for a model
trained on split i, defined only for j > i (no evaluation on the training
split's own period). With n splits there are (n-1)(n-2)/2 differences
behind each summary score:

  deterioration, consecutive:  M_i^{j+1} - M_i^j       down each train column
  deterioration, anchor:       M_i^j     - M_i^{i+1}   vs the column's first test row
  adaptation, consecutive:     M_{i+1}^j - M_i^j       across each test row
  adaptation, anchor:          M_i^j     - M_1^j       vs the oldest-trained column

Significance is computed on the mean-over-seeds grid; per-seed score
extremes are reported separately.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import DataError, IncompleteGridError, UsageError
from .stats import WilcoxonResult, wilcoxon_signed_rank

SCORE_NAMES = ("ds_consecutive", "ds_anchor", "as_consecutive", "as_anchor")


@dataclass(frozen=True)
class EvaluationGrid:
    """Lower-triangular metric matrix per (train split, test split, seed)."""

    n: int
    seeds: tuple
    cells: Mapping[tuple, float]  # (i, j, seed) -> value

    def __post_init__(self):
        if self.n < 2:
            raise DataError(f"grid needs at least 2 splits, got {self.n}")
        if not self.seeds:
            raise DataError("grid needs at least one seed")
        missing = []
        for i in range(1, self.n):
            for j in range(i + 1, self.n + 1):
                for s in self.seeds:
                    if (i, j, s) not in self.cells:
                        missing.append((i, j, s))
        if missing:
            raise IncompleteGridError(f"grid is missing {len(missing)} cells, first {missing[:3]}")
        extra = [k for k in self.cells if not (1 <= k[0] < k[1] <= self.n) or k[2] not in self.seeds]
        if extra:
            raise DataError(f"cells outside the lower triangle: {extra[:3]}")

    @property
    def mean_cells(self) -> dict:
        out = {}
        for i in range(1, self.n):
            for j in range(i + 1, self.n + 1):
                out[(i, j)] = sum(self.cells[(i, j, s)] for s in self.seeds) / len(self.seeds)
        return out

    def per_seed(self, seed: int) -> "EvaluationGrid":
        if seed not in self.seeds:
            raise UsageError(f"seed {seed} not in grid")
        cells = {k: v for k, v in self.cells.items() if k[2] == seed}
        return EvaluationGrid(n=self.n, seeds=(seed,), cells=cells)

    @classmethod
    def from_mean_matrix(cls, matrix: Mapping[tuple, float], n: int, seed: int = 0) -> "EvaluationGrid":
        """Wrap an already-averaged matrix as a single-seed grid."""
        return cls(n=n, seeds=(seed,), cells={(i, j, seed): v for (i, j), v in matrix.items()})


@dataclass(frozen=True)
class ScoreResult:
    name: str
    score: float
    diffs: tuple


def _require_n3(grid: EvaluationGrid) -> None:
    if grid.n < 3:
        raise DataError("summary scores need at least 3 splits (no difference pairs otherwise)")


def deterioration_consecutive(grid: EvaluationGrid) -> ScoreResult:
    _require_n3(grid)
    m = grid.mean_cells
    diffs = [m[(i, j + 1)] - m[(i, j)] for i in range(1, grid.n) for j in range(i + 1, grid.n)]
    return ScoreResult("ds_consecutive", sum(diffs) / len(diffs), tuple(diffs))


def deterioration_anchor(grid: EvaluationGrid) -> ScoreResult:
    _require_n3(grid)
    m = grid.mean_cells
    diffs = [m[(i, j)] - m[(i, i + 1)] for i in range(1, grid.n) for j in range(i + 2, grid.n + 1)]
    return ScoreResult("ds_anchor", sum(diffs) / len(diffs), tuple(diffs))


def adaptation_consecutive(grid: EvaluationGrid) -> ScoreResult:
    _require_n3(grid)
    m = grid.mean_cells
    diffs = [m[(i + 1, j)] - m[(i, j)] for j in range(3, grid.n + 1) for i in range(1, j - 1)]
    return ScoreResult("as_consecutive", sum(diffs) / len(diffs), tuple(diffs))


def adaptation_anchor(grid: EvaluationGrid) -> ScoreResult:
    _require_n3(grid)
    m = grid.mean_cells
    diffs = [m[(i, j)] - m[(1, j)] for j in range(3, grid.n + 1) for i in range(2, j)]
    return ScoreResult("as_anchor", sum(diffs) / len(diffs), tuple(diffs))


SCORE_FUNCTIONS = {
    "ds_consecutive": deterioration_consecutive,
    "ds_anchor": deterioration_anchor,
    "as_consecutive": adaptation_consecutive,
    "as_anchor": adaptation_anchor,
}


def expected_diff_count(n: int) -> int:
    return (n - 1) * (n - 2) // 2


def salient_values(grid: EvaluationGrid) -> tuple:
    """(first test of oldest model, last test of oldest model, last test of newest model)."""
    m = grid.mean_cells
    return (m[(1, 2)], m[(1, grid.n)], m[(grid.n - 1, grid.n)])


def seed_extremes(grid: EvaluationGrid) -> dict:
    """Min and max of each summary score over per-seed grids."""
    out = {}
    for name, fn in SCORE_FUNCTIONS.items():
        values = [fn(grid.per_seed(s)).score for s in grid.seeds]
        out[name] = (min(values), max(values))
    return out


@dataclass(frozen=True)
class ScoreSummary:
    result: ScoreResult
    test: WilcoxonResult

    @property
    def score(self) -> float:
        return self.result.score

    @property
    def significant(self) -> bool:
        return self.test.significant


@dataclass(frozen=True)
class SummaryScores:
    """The four scores with significance, the salient triple and seed extremes."""

    n: int
    alpha: float
    scores: Mapping[str, ScoreSummary]
    salient: tuple
    seed_extremes: Mapping[str, tuple]
    single_seed: bool

    def __getitem__(self, name: str) -> ScoreSummary:
        return self.scores[name]


def summarize_grid(grid: EvaluationGrid, alpha: float = 0.05) -> SummaryScores:
    _require_n3(grid)
    scores = {}
    for name, fn in SCORE_FUNCTIONS.items():
        result = fn(grid)
        scores[name] = ScoreSummary(result=result, test=wilcoxon_signed_rank(result.diffs, alpha=alpha))
    return SummaryScores(
        n=grid.n,
        alpha=alpha,
        scores=scores,
        salient=salient_values(grid),
        seed_extremes=seed_extremes(grid),
        single_seed=len(grid.seeds) < 2,
    )
