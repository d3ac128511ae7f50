"""Alignment of explanations with known marginal effects.

Three views, each motivated by how importance values get read in practice:
directionality (is the sign right, with a relative-magnitude escape hatch
for near-zero effects), concordance (Spearman rank correlation of the full
importance ordering), and relevance_k (overlap of the top-k magnitude sets).
Rank ties break deterministically by feature index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import substream

DEFAULT_EPS1 = 1e-2
DEFAULT_EPS2 = 1e-2


def rank_signed(values: np.ndarray) -> np.ndarray:
    """Ranks 1..D ascending by signed value; ties broken by index."""
    values = np.asarray(values, dtype=float)
    d = values.shape[0]
    order = np.lexsort((np.arange(d), values))
    ranks = np.empty(d, dtype=int)
    ranks[order] = np.arange(1, d + 1)
    return ranks


def top_k_magnitude(values: np.ndarray, k: int) -> set[int]:
    """Indices of the k largest-magnitude entries; ties broken by index."""
    values = np.asarray(values, dtype=float)
    d = values.shape[0]
    order = np.lexsort((np.arange(d), -np.abs(values)))
    return set(int(i) for i in order[:k])


def _sign_score(e: float, beta_j: float, row_max: float, eps1: float, eps2: float) -> int:
    if abs(beta_j) > eps1:
        return 1 if beta_j * e > 0 else 0
    if row_max == 0.0:
        # Degenerate all-zero explanation: a zero importance is the best
        # possible call for a near-zero effect, so it counts as correct.
        return 1
    return 1 if abs(e) / row_max < eps2 else 0


def directionality(
    e_values: np.ndarray,
    all_e: np.ndarray,
    beta_j: float,
    eps1: float = DEFAULT_EPS1,
    eps2: float = DEFAULT_EPS2,
    defined: np.ndarray | None = None,
) -> float:
    """Fraction of instances whose importance sign matches the true effect.

    For |beta_j| <= eps1 the check relaxes to whether the importance is
    relatively negligible: |e| / max_j' |e_j'| below eps2 (a ratio of exactly
    zero counts as correct).  ``defined`` masks instances whose entry for
    this feature is undefined (normalized attributions); they are skipped.
    """
    e_values = np.asarray(e_values, dtype=float)
    all_e = np.asarray(all_e, dtype=float)
    if e_values.shape[0] != all_e.shape[0]:
        raise ValueError("e_values and all_e must agree on the instance count")
    # Row maxima over defined entries only (undefined ones carry nan).
    row_max = np.max(np.abs(np.nan_to_num(all_e, nan=0.0)), axis=1)
    keep = np.ones(e_values.shape[0], dtype=bool) if defined is None else np.asarray(defined, dtype=bool)
    scores = [
        _sign_score(e_values[i], beta_j, row_max[i], eps1, eps2)
        for i in range(e_values.shape[0])
        if keep[i]
    ]
    if not scores:
        return float("nan")
    return float(np.mean(scores))


def concordance(e: np.ndarray, beta: np.ndarray) -> float:
    """Spearman rank correlation between explanation and effect rankings."""
    e = np.asarray(e, dtype=float)
    beta = np.asarray(beta, dtype=float)
    d = e.shape[0]
    if d < 2:
        raise ValueError("concordance needs at least two features")
    if beta.shape[0] != d:
        raise ValueError("e and beta must have the same length")
    diff = rank_signed(beta) - rank_signed(e)
    return 1.0 - 6.0 * float(np.sum(diff * diff)) / (d * (d * d - 1.0))


def relevance_k(e: np.ndarray, beta: np.ndarray, k: int) -> float:
    """Overlap fraction between top-k magnitude sets of e and beta."""
    d = np.asarray(e).shape[0]
    if not 1 <= k <= d - 1:
        raise ValueError("k must lie in [1, D-1]")
    return len(top_k_magnitude(beta, k) & top_k_magnitude(e, k)) / k


def random_explainer(m: int, d: int, seed: int) -> np.ndarray:
    """Baseline importance matrix: i.i.d. standard normal entries."""
    return substream(seed, "random-explainer").standard_normal((m, d))


@dataclass
class InstanceScores:
    """Per-instance metric values, the matched samples improvement tests need.

    nan marks entries that are undefined for an instance (masked feature, or
    too few defined features to rank).
    """

    sign_scores: np.ndarray  # M x D
    concordance: np.ndarray  # M
    relevance: np.ndarray  # len(ks) x M
    ks: list[int]


def per_instance_scores(
    explanations: np.ndarray,
    beta: np.ndarray,
    ks: list[int] | None = None,
    eps1: float = DEFAULT_EPS1,
    eps2: float = DEFAULT_EPS2,
    undefined_mask: np.ndarray | None = None,
) -> InstanceScores:
    """All three metrics at instance granularity.

    Undefined entries are excluded rather than imputed: sign scores skip
    them per feature, while concordance and relevance for an instance are
    computed over its defined subset and skipped entirely if fewer than two
    features remain.
    """
    E = np.asarray(explanations, dtype=float)
    beta = np.asarray(beta, dtype=float)
    m, d = E.shape
    if beta.shape[0] != d:
        raise ValueError("beta length must match the explanation width")
    mask = (
        np.zeros((m, d), dtype=bool)
        if undefined_mask is None
        else np.asarray(undefined_mask, dtype=bool)
    )
    if mask.shape != E.shape:
        raise ValueError("undefined_mask must match the explanation shape")
    ks = ks if ks is not None else list(range(1, d))

    row_max = np.max(np.abs(np.nan_to_num(E, nan=0.0)), axis=1)
    sign_scores = np.full((m, d), np.nan)
    for i in range(m):
        for j in range(d):
            if not mask[i, j]:
                sign_scores[i, j] = _sign_score(E[i, j], beta[j], row_max[i], eps1, eps2)

    conc = np.full(m, np.nan)
    rel = np.full((len(ks), m), np.nan)
    for i in range(m):
        ok = ~mask[i]
        d_eff = int(ok.sum())
        if d_eff < 2:
            continue
        conc[i] = concordance(E[i, ok], beta[ok])
        for ki, k in enumerate(ks):
            if k <= d_eff - 1:
                rel[ki, i] = relevance_k(E[i, ok], beta[ok], k)
    return InstanceScores(sign_scores, conc, rel, list(ks))


@dataclass
class AlignmentReport:
    directionality: np.ndarray  # per feature
    concordance: np.ndarray  # per instance (nan where undefined)
    concordance_mean: float
    relevance: dict[int, tuple[float, float]]  # k -> (mean, standard error)
    n_instances: int
    eps1: float
    eps2: float
    feature_names: list[str] | None = None


def evaluate(
    explanations: np.ndarray,
    beta: np.ndarray,
    ks: list[int] | None = None,
    eps1: float = DEFAULT_EPS1,
    eps2: float = DEFAULT_EPS2,
    undefined_mask: np.ndarray | None = None,
    feature_names: list[str] | None = None,
) -> AlignmentReport:
    """Aggregate the per-instance scores into the standard report."""
    scores = per_instance_scores(explanations, beta, ks, eps1, eps2, undefined_mask)
    with np.errstate(invalid="ignore"):
        dir_per_feature = np.array(
            [
                float(np.nanmean(col)) if np.any(~np.isnan(col)) else float("nan")
                for col in scores.sign_scores.T
            ]
        )
    valid = scores.concordance[~np.isnan(scores.concordance)]
    relevance: dict[int, tuple[float, float]] = {}
    for ki, k in enumerate(scores.ks):
        vals = scores.relevance[ki]
        vals = vals[~np.isnan(vals)]
        if len(vals) == 0:
            relevance[k] = (float("nan"), float("nan"))
        else:
            se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            relevance[k] = (float(vals.mean()), se)
    return AlignmentReport(
        directionality=dir_per_feature,
        concordance=scores.concordance,
        concordance_mean=float(valid.mean()) if len(valid) else float("nan"),
        relevance=relevance,
        n_instances=scores.sign_scores.shape[0],
        eps1=eps1,
        eps2=eps2,
        feature_names=list(feature_names) if feature_names is not None else None,
    )
