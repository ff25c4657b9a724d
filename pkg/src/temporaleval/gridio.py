"""Grid CSV reading and writing.

The grid CSV is the single interchange artifact: columns train_split,
test_split, seed, metric_value (task metric in percent). Cells whose
trainer crashed carry the literal value "failed". Files are always written
in sorted (train, test, seed) order with repr() floats, so identical runs
produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import DataError, IncompleteGridError
from .summary import EvaluationGrid

HEADER = ["train_split", "test_split", "seed", "metric_value"]
FAILED = "failed"


def write_grid_csv(path, cells: Mapping[tuple, float], failed: Sequence[tuple] = ()) -> None:
    path = Path(path)
    rows = [(i, j, s, repr(float(v))) for (i, j, s), v in cells.items()]
    rows += [(i, j, s, FAILED) for (i, j, s) in failed]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        writer.writerows(rows)


def read_grid_csv(path) -> tuple:
    """Returns (cells, failed): values keyed by (train, test, seed)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"grid file {path} does not exist")
    cells: dict = {}
    failed: list = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HEADER:
            raise DataError(f"{path}: expected header {','.join(HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{line_no}: expected 4 columns")
            try:
                key = (int(row[0]), int(row[1]), int(row[2]))
            except ValueError:
                raise DataError(f"{path}:{line_no}: non-integer split or seed")
            if row[3] == FAILED:
                failed.append(key)
                continue
            try:
                cells[key] = float(row[3])
            except ValueError:
                raise DataError(f"{path}:{line_no}: bad metric value {row[3]!r}")
    return cells, failed


def grid_from_cells(cells: Mapping[tuple, float], failed: Sequence[tuple] = ()) -> EvaluationGrid:
    """Validate completeness and wrap as an EvaluationGrid."""
    if failed:
        raise IncompleteGridError(f"{len(failed)} failed cells, first {list(failed)[:3]}")
    if not cells:
        raise IncompleteGridError("grid has no cells")
    n = max(j for (_, j, _) in cells)
    seeds = tuple(sorted({s for (_, _, s) in cells}))
    return EvaluationGrid(n=n, seeds=seeds, cells=dict(cells))


def load_grid(path) -> EvaluationGrid:
    cells, failed = read_grid_csv(path)
    return grid_from_cells(cells, failed)


def mean_over_seeds(cells: Mapping[tuple, float]) -> dict:
    """Per (train, test) mean over whatever seeds are present; partial grids allowed."""
    acc: dict = {}
    for (i, j, s), v in cells.items():
        acc.setdefault((i, j), []).append(v)
    return {k: sum(vs) / len(vs) for k, vs in acc.items()}


def render_matrix(cells: Mapping[tuple, float], decimals: int = 1) -> str:
    """Text table with train splits as columns and test splits as rows."""
    mean = mean_over_seeds(cells)
    if not mean:
        return "| test\\train |\n|---|\n"
    n = max(j for (_, j) in mean)
    trains = list(range(1, n))
    tests = list(range(2, n + 1))
    lines = ["| test\\train | " + " | ".join(str(i) for i in trains) + " |"]
    lines.append("|---|" + "---|" * len(trains))
    for j in tests:
        row = []
        for i in trains:
            v = mean.get((i, j))
            row.append("-" if v is None else f"{v:.{decimals}f}")
        lines.append(f"| {j} | " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"
