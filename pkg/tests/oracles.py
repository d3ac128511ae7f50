"""Independent reference implementations used to pin expected values.

Everything here is deliberately written as plain loops or brute-force
enumeration, separate from the library's vectorized paths, so the two can
disagree when one of them is wrong.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# -- ranking / metrics -------------------------------------------------------


def rank_by_value(values) -> list[int]:
    """O(D^2) ranks, 1 = smallest, ties broken by lower index first."""
    d = len(values)
    ranks = []
    for j in range(d):
        smaller = 0
        for i in range(d):
            if values[i] < values[j] or (values[i] == values[j] and i < j):
                smaller += 1
        ranks.append(smaller + 1)
    return ranks


def spearman(e, beta) -> float:
    d = len(e)
    re = rank_by_value(e)
    rb = rank_by_value(beta)
    ss = 0
    for j in range(d):
        diff = rb[j] - re[j]
        ss += diff * diff
    return 1.0 - 6.0 * ss / (d * (d * d - 1.0))


def top_k(values, k) -> set[int]:
    d = len(values)
    order = sorted(range(d), key=lambda j: (-abs(values[j]), j))
    return set(order[:k])


def relevance(e, beta, k) -> float:
    return len(top_k(beta, k) & top_k(e, k)) / k


def sign_score(e_ij, beta_j, row_max, eps1, eps2) -> int:
    if abs(beta_j) > eps1:
        return 1 if beta_j * e_ij > 0 else 0
    if row_max == 0.0:
        return 1
    return 1 if abs(e_ij) / row_max < eps2 else 0


def directionality(e_col, E, beta_j, eps1=1e-2, eps2=1e-2) -> float:
    m = len(e_col)
    total = 0
    for i in range(m):
        row_max = max(abs(v) for v in E[i])
        total += sign_score(e_col[i], beta_j, row_max, eps1, eps2)
    return total / m


# -- AUC ---------------------------------------------------------------------


def auc_pairs(scores, labels) -> float:
    """All positive/negative pairs; ties count half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


# -- Wilcoxon signed rank ----------------------------------------------------


def average_ranks(values) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = 0.5 * (i + 1 + j + 1)
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def wilcoxon_enumeration(diffs, alternative) -> float:
    """p-value by materializing all 2^n sign assignments."""
    nz = [d for d in diffs if d != 0.0]
    n = len(nz)
    if n == 0:
        return 1.0
    ranks = np.array(average_ranks([abs(d) for d in nz]))
    w_obs = sum(r for d, r in zip(nz, ranks) if d > 0)
    bits = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(float)
    w_all = bits @ ranks
    p_greater = float(np.mean(w_all >= w_obs))
    p_less = float(np.mean(w_all <= w_obs))
    if alternative == "greater":
        return p_greater
    if alternative == "less":
        return p_less
    return min(1.0, 2.0 * min(p_greater, p_less))


# -- Shapley by direct coalition enumeration ---------------------------------


def shapley_enumeration(value_fn, d) -> list[float]:
    """phi from the permutation-average definition, one coalition at a time.

    ``value_fn`` maps a frozenset of feature indices to a scalar.
    """
    phi = []
    for j in range(d):
        others = [i for i in range(d) if i != j]
        total = 0.0
        for size in range(d):
            for subset in itertools.combinations(others, size):
                s = frozenset(subset)
                weight = (
                    math.factorial(size) * math.factorial(d - size - 1)
                    / math.factorial(d)
                )
                total += weight * (value_fn(s | {j}) - value_fn(s))
        phi.append(total)
    return phi
