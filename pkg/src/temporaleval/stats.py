"""Two-sided Wilcoxon signed-rank test with an exact null for small samples.

Zero differences are discarded (Wilcoxon's original treatment) and tied
magnitudes receive average ranks. For effective sample sizes up to
``exact_limit`` the p-value comes from the exact null distribution,
computed by dynamic programming over doubled ranks (doubling makes average
ranks integral); beyond that a normal approximation with tie-corrected
variance is used. The two-sided p is 2 * P(W <= min(W+, W-)), capped at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import UsageError

EXACT_LIMIT_DEFAULT = 25


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(w_plus, w_minus)
    w_plus: float
    w_minus: float
    n_effective: int
    p_value: float
    significant: bool
    alpha: float
    method: str  # "exact" | "normal" | "degenerate"


def average_ranks(values: Sequence[float]) -> list:
    """Ranks 1..n with ties sharing the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j < len(values) and values[order[j]] == values[order[i]]:
            j += 1
        avg = (i + j + 1) / 2  # positions are 1-based
        for k in range(i, j):
            ranks[order[k]] = avg
        i = j
    return ranks


def _exact_p_at_most(doubled_ranks: Sequence[int], doubled_w: int) -> float:
    """P(W+ <= w) under the exact null, by convolution over sign assignments."""
    total = sum(doubled_ranks)
    bound = min(doubled_w, total)
    counts = [0] * (bound + 1)
    counts[0] = 1
    for r in doubled_ranks:
        for s in range(bound, r - 1, -1):
            counts[s] += counts[s - r]
        # sums above `bound` are never needed; drop them implicitly
    favorable = sum(counts)
    return favorable / (2 ** len(doubled_ranks))


def wilcoxon_signed_rank(
    diffs: Sequence[float],
    alpha: float = 0.05,
    exact_limit: int = EXACT_LIMIT_DEFAULT,
) -> WilcoxonResult:
    """Two-sided test that the median difference is zero."""
    if len(diffs) == 0:
        raise UsageError("difference vector is empty")
    if not 0 < alpha < 1:
        raise UsageError("alpha must be in (0, 1)")
    nonzero = [d for d in diffs if d != 0]
    n = len(nonzero)
    if n == 0:
        return WilcoxonResult(
            statistic=0.0, w_plus=0.0, w_minus=0.0, n_effective=0,
            p_value=1.0, significant=False, alpha=alpha, method="degenerate",
        )

    ranks = average_ranks([abs(d) for d in nonzero])
    w_plus = sum(r for r, d in zip(ranks, nonzero) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, nonzero) if d < 0)
    w = min(w_plus, w_minus)

    if n <= exact_limit:
        doubled = [round(2 * r) for r in ranks]
        p = min(1.0, 2.0 * _exact_p_at_most(doubled, round(2 * w)))
        method = "exact"
    else:
        mean = n * (n + 1) / 4
        tie_term = 0.0
        seen = {}
        for r in [abs(d) for d in nonzero]:
            seen[r] = seen.get(r, 0) + 1
        for t in seen.values():
            tie_term += t ** 3 - t
        var = n * (n + 1) * (2 * n + 1) / 24 - tie_term / 48
        if var <= 0:
            p = 1.0
        else:
            z = (w - mean) / math.sqrt(var)
            p = min(1.0, math.erfc(-z / math.sqrt(2)))  # 2 * Phi(z) for z <= 0
        method = "normal"

    return WilcoxonResult(
        statistic=w, w_plus=w_plus, w_minus=w_minus, n_effective=n,
        p_value=p, significant=p < alpha, alpha=alpha, method=method,
    )
