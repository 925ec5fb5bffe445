"""Nonparametric two-sample screening and distribution summaries.

The screen is the two-sided Wilcoxon rank sum test: exact when the pooled
sample is small and tie-free (the null distribution of U is built by
dynamic programming over rank subsets), otherwise a normal approximation
with tie-corrected variance and continuity correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .dataset import Cohort, Label
from .errors import EmptySample, SingleClassCohort

EXACT_LIMIT = 20  # exact null distribution when n1 + n2 <= this and no ties

_TINY_P = 1e-300


class Alternative(Enum):
    TwoSided = "two-sided"


class PMethod(Enum):
    Exact = "exact"
    NormalApprox = "normal-approx"


@dataclass(frozen=True)
class RankSumResult:
    w_statistic: float  # rank-sum of the first sample (mid-ranks)
    u_statistic: float
    p_value: float
    method: PMethod
    n1: int
    n2: int


@dataclass(frozen=True)
class BoxSummary:
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]
    n: int


@dataclass(frozen=True)
class FeatureSignificance:
    feature: str
    direction: int  # sign of (median_pos - median_neg)
    p_value: float
    method: PMethod


def midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties receiving the mean of their rank block."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # positions i..j share the average of ranks i+1..j+1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def _u_counts(n1: int, n2: int) -> np.ndarray:
    """counts[u] = number of rank subsets of size n1 with Mann-Whitney U = u.

    Recurrence on the largest remaining rank: if it belongs to the first
    sample it beats all n remaining second-sample members (U gains n),
    otherwise it contributes nothing:  f(u; m, n) = f(u-n; m-1, n) + f(u; m, n-1).
    """
    max_u = n1 * n2
    dp = [np.zeros(max_u + 1) for _ in range(n1 + 1)]
    for m in range(n1 + 1):
        dp[m][0] = 1.0  # n = 0: U is forced to 0
    for n in range(1, n2 + 1):
        new = [np.zeros(max_u + 1) for _ in range(n1 + 1)]
        new[0][0] = 1.0  # m = 0: U is forced to 0
        for m in range(1, n1 + 1):
            shifted = np.zeros(max_u + 1)
            if n <= max_u:
                shifted[n:] = new[m - 1][: max_u + 1 - n]
            new[m] = shifted + dp[m]
        dp = new
    return dp[n1]


def wilcoxon_rank_sum(
    x: Sequence[float],
    y: Sequence[float],
    alternative: Alternative = Alternative.TwoSided,
) -> RankSumResult:
    """Two-sided Wilcoxon rank sum / Mann-Whitney test.

    W is the mid-rank sum of ``x``; U = W - n1(n1+1)/2.  Exact p by full
    enumeration of the null U distribution when n1+n2 <= 20 and the pooled
    data is tie-free; otherwise normal approximation with tie-corrected
    variance and a 0.5 continuity correction.  p is clipped into (0, 1].
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or y.size == 0:
        raise EmptySample("both samples must be non-empty")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("samples must be finite")

    n1, n2 = x.size, y.size
    pooled = np.concatenate([x, y])
    ranks = midranks(pooled)
    w = float(ranks[:n1].sum())
    u = w - n1 * (n1 + 1) / 2.0

    has_ties = len(np.unique(pooled)) < pooled.size
    if n1 + n2 <= EXACT_LIMIT and not has_ties:
        counts = _u_counts(n1, n2)
        total = counts.sum()
        u_int = int(round(u))
        lower = counts[: u_int + 1].sum() / total
        upper = counts[u_int:].sum() / total
        p = min(1.0, 2.0 * min(lower, upper))
        method = PMethod.Exact
    else:
        mean_u = n1 * n2 / 2.0
        n = n1 + n2
        _, tie_sizes = np.unique(pooled, return_counts=True)
        tie_term = float(np.sum(tie_sizes.astype(float) ** 3 - tie_sizes))
        var_u = (n1 * n2 / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
        if var_u <= 0:
            p = 1.0  # every observation tied
        else:
            z = max(0.0, (abs(u - mean_u) - 0.5) / math.sqrt(var_u))
            p = math.erfc(z / math.sqrt(2.0))
        method = PMethod.NormalApprox

    p = min(1.0, max(p, _TINY_P))
    return RankSumResult(w_statistic=w, u_statistic=float(u), p_value=p, method=method, n1=n1, n2=n2)


def boxplot_summary(values: Sequence[float]) -> BoxSummary:
    """Median, quartiles, Tukey 1.5*IQR whiskers, and outliers.

    Quartiles use linear interpolation between order statistics at
    position 1 + (n-1)q, i.e. the common "type 7" rule.
    """
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise EmptySample("boxplot_summary needs at least one value")
    q1, median, q3 = (float(q) for q in np.quantile(arr, [0.25, 0.5, 0.75]))
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    if inside.size == 0:  # not reachable for real data; keep the summary total
        inside = arr
    outliers = tuple(float(v) for v in arr[(arr < lo_fence) | (arr > hi_fence)])
    return BoxSummary(
        median=median,
        q1=q1,
        q3=q3,
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=outliers,
        n=int(arr.size),
    )


def significance_table(
    cohort: Cohort,
    split_by_label: Callable[[object], bool] | None = None,
) -> list[FeatureSignificance]:
    """One rank-sum test per feature, positives vs negatives.

    Direction is the sign of (median_pos - median_neg).  Sorted ascending
    by p; ties broken by canonical feature order.
    """
    if split_by_label is None:
        split_by_label = lambda rec: rec.label is Label.Positive  # noqa: E731
    pos = [r for r in cohort.records if split_by_label(r)]
    neg = [r for r in cohort.records if not split_by_label(r)]
    if not pos or not neg:
        raise SingleClassCohort(
            f"need both classes, got {len(pos)} positive / {len(neg)} negative"
        )

    rows = []
    for order, feature in enumerate(cohort.feature_manifest):
        xs = np.array([r.features[feature] for r in pos])
        ys = np.array([r.features[feature] for r in neg])
        res = wilcoxon_rank_sum(xs, ys)
        diff = float(np.median(xs) - np.median(ys))
        direction = 0 if diff == 0 else (1 if diff > 0 else -1)
        rows.append((res.p_value, order, FeatureSignificance(feature, direction, res.p_value, res.method)))
    rows.sort(key=lambda t: (t[0], t[1]))
    return [row[2] for row in rows]


def significance_to_json(table: list[FeatureSignificance]) -> dict:
    return {
        "schema": "hemascreen.significance/1",
        "features": [
            {
                "feature": row.feature,
                "direction": row.direction,
                "p_value": row.p_value,
                "method": row.method.value,
            }
            for row in table
        ],
    }
