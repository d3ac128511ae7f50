"""Wilcoxon signed-rank testing and the improvement verdict framework.

The exact null distribution of the positive-rank sum is built by a
subset-sum convolution over the (doubled, hence integer) magnitude ranks,
conditioning on observed ties; enumeration of sign patterns is never
materialized.  Beyond n = 25 a normal approximation with tie and continuity
corrections takes over.  Zero differences are dropped before ranking.

An explanation method counts as an improvement over a baseline on a metric
when at least one of the metric's dimensions shifts significantly toward
better and none shifts significantly toward worse; differences are always
taken as new minus old, so "better" means a location above zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import norm

EXACT_MAX_N = 25
DEFAULT_ALPHA = 0.05

ALTERNATIVES = ("greater", "less", "two-sided")


class WilcoxonResult(NamedTuple):
    statistic: float  # positive-rank sum W+
    pvalue: float
    n: int  # differences used after zero removal
    method: str  # "exact" | "normal" | "none"
    no_evidence: bool = False


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + 1 + j + 1)
        i = j + 1
    return ranks


def _exact_null_counts(double_ranks: np.ndarray) -> np.ndarray:
    """counts[s] = number of sign patterns with doubled rank sum s."""
    total = int(double_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in double_ranks:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: len(counts) - r]
        counts += shifted
    return counts


def wilcoxon_signed_rank(
    diffs: np.ndarray, alternative: str = "two-sided"
) -> WilcoxonResult:
    """Signed-rank test of whether the differences are centered at zero.

    ``alternative='greater'`` tests for a location above zero.  All-zero
    input yields an explicit no-evidence outcome (p = 1) rather than a
    statistic.
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}")
    diffs = np.asarray(diffs, dtype=float)
    if not np.all(np.isfinite(diffs)):
        raise ValueError("differences must be finite")
    nz = diffs[diffs != 0.0]
    n = len(nz)
    if n == 0:
        return WilcoxonResult(float("nan"), 1.0, 0, "none", no_evidence=True)

    ranks = _average_ranks(np.abs(nz))
    w_plus = float(ranks[nz > 0].sum())

    if n <= EXACT_MAX_N:
        double_ranks = np.round(2.0 * ranks).astype(int)
        counts = _exact_null_counts(double_ranks)
        total = 2.0**n
        target = int(round(2.0 * w_plus))
        p_greater = float(counts[target:].sum() / total)
        p_less = float(counts[: target + 1].sum() / total)
        method = "exact"
    else:
        mu = n * (n + 1) / 4.0
        tie_counts = np.unique(np.abs(nz), return_counts=True)[1]
        tie_term = float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        sigma = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0 - tie_term)
        if sigma == 0.0:
            return WilcoxonResult(w_plus, 1.0, n, "normal", no_evidence=True)
        p_greater = float(norm.sf((w_plus - mu - 0.5) / sigma))
        p_less = float(norm.cdf((w_plus - mu + 0.5) / sigma))
        method = "normal"

    if alternative == "greater":
        p = p_greater
    elif alternative == "less":
        p = p_less
    else:
        p = min(1.0, 2.0 * min(p_greater, p_less))
    return WilcoxonResult(w_plus, min(1.0, max(0.0, p)), n, method)


@dataclass
class DimensionOutcome:
    delta: str
    p_better: float
    p_worse: float
    outcome: str  # "better" | "worse" | "no-change"


@dataclass
class ImprovementVerdict:
    metric: str
    dimensions: list[DimensionOutcome]
    overall: str  # "improved" | "not-improved" | "worsened"
    alpha: float


def test_improvement(
    metric_values_old: np.ndarray,
    metric_values_new: np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    metric: str = "",
    deltas: list[str] | None = None,
) -> ImprovementVerdict:
    """Per-dimension two-one-sided Wilcoxon tests plus the overall verdict.

    Inputs are matched samples shaped (n_dimensions, M) or (M,) for a
    single-dimension metric.  Overall is "improved" iff at least one
    dimension rejects toward better and none rejects toward worse;
    "worsened" iff any dimension rejects toward worse.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    old = np.atleast_2d(np.asarray(metric_values_old, dtype=float))
    new = np.atleast_2d(np.asarray(metric_values_new, dtype=float))
    if old.shape != new.shape:
        raise ValueError("old and new samples must have matching shapes")
    n_dim = old.shape[0]
    labels = deltas if deltas is not None else [str(i) for i in range(n_dim)]
    if len(labels) != n_dim:
        raise ValueError("deltas must label every dimension")

    outcomes: list[DimensionOutcome] = []
    any_better = False
    any_worse = False
    for i in range(n_dim):
        # Matched-pair deletion: drop instances undefined on either side.
        paired = np.isfinite(old[i]) & np.isfinite(new[i])
        diffs = new[i][paired] - old[i][paired]
        res_better = wilcoxon_signed_rank(diffs, "greater")
        res_worse = wilcoxon_signed_rank(diffs, "less")
        if res_worse.pvalue < alpha and not res_worse.no_evidence:
            outcome = "worse"
            any_worse = True
        elif res_better.pvalue < alpha and not res_better.no_evidence:
            outcome = "better"
            any_better = True
        else:
            outcome = "no-change"
        outcomes.append(
            DimensionOutcome(labels[i], res_better.pvalue, res_worse.pvalue, outcome)
        )

    if any_better and not any_worse:
        overall = "improved"
    elif any_worse and not any_better:
        overall = "worsened"
    else:
        # Includes the mixed case: a significant loss on one dimension
        # cancels a gain on another.
        overall = "not-improved"
    return ImprovementVerdict(metric, outcomes, overall, alpha)
