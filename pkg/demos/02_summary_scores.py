#!/usr/bin/env python3
"""Summary scores and exact significance on a published-style NER matrix.

The grid below is a 6-split lower-triangular matrix of span micro-F1 values
(percent). The four summary scores condense it: deterioration (D) tracks a
fixed model down a column, adaptation (A) tracks a fixed test set across a
row; each has a consecutive-period and an anchor variant. A two-sided exact
Wilcoxon signed-rank test over the ten differences marks significance.
"""

from temporaleval import EvaluationGrid, summarize_grid
from temporaleval.harness import extremes_table_md, summary_table_md

MATRIX = {
    (1, 2): 55.18,
    (1, 3): 56.22, (2, 3): 57.13,
    (1, 4): 55.09, (2, 4): 53.95, (3, 4): 59.43,
    (1, 5): 51.06, (2, 5): 53.12, (3, 5): 57.75, (4, 5): 57.82,
    (1, 6): 54.10, (2, 6): 54.56, (3, 6): 59.48, (4, 6): 60.41, (5, 6): 62.99,
}

grid = EvaluationGrid.from_mean_matrix(MATRIX, n=6)
scores = summarize_grid(grid, alpha=0.05)

print(summary_table_md(scores, label="biLSTM-CRF"))
for name in ("ds_anchor", "as_anchor", "ds_consecutive", "as_consecutive"):
    s = scores[name]
    print(f"{name:16s} score={s.score:+.3f}  W={s.test.statistic:.1f}  "
          f"p={s.test.p_value:.4f}  significant={s.significant}")
print()
print(extremes_table_md(scores, label="biLSTM-CRF"))
