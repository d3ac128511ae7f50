"""Shapley-value feature attribution with three evaluation paths.

The value of a coalition is the model output at a hybrid point: coalition
features take the instance's values, the rest take a single background
vector (training feature means by default).  Exact enumeration covers up to
20 features; permutation sampling with antithetic pairs scales beyond; the
linear closed form beta_j * (xi_j - xbar_j) covers known linear models.
Dividing an attribution by (xi_j - xbar_j) recovers the underlying slope
for linear models, which is the normalization applied before comparing
attributions against marginal effects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .rng import substream

EXACT_MAX_FEATURES = 20
DEFAULT_EPS_DIV = 1e-6
_EVAL_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class ShapConfig:
    method: str = "exact"  # "exact" | "permutation-sampling" | "linear-closed-form"
    background: np.ndarray | None = None  # default: training feature means
    n_permutations: int = 64
    seed: int = 0


@dataclass
class ShapExplanation:
    phi: np.ndarray
    base_value: float
    instance: np.ndarray
    standard_errors: np.ndarray | None = None


@dataclass
class NormalizedImportance:
    """Per-feature slope estimates; entries with near-zero displacement are
    undefined and must be excluded from sign and rank computations."""

    values: np.ndarray  # nan where undefined
    undefined: np.ndarray  # boolean mask


def _hybrid_rows(
    masks: np.ndarray, xi: np.ndarray, background: np.ndarray
) -> np.ndarray:
    return np.where(masks, xi, background)


def shap_exact(
    model: Callable[[np.ndarray], np.ndarray],
    xi: np.ndarray,
    cfg: ShapConfig,
) -> ShapExplanation:
    """Exact attribution by enumerating all 2^D coalitions."""
    xi = np.asarray(xi, dtype=float)
    d = xi.shape[0]
    if d > EXACT_MAX_FEATURES:
        raise ValueError(
            f"exact enumeration supports at most {EXACT_MAX_FEATURES} features; "
            f"got {d} (use permutation sampling)"
        )
    background = _background_for(cfg, d)

    n_masks = 1 << d
    bits = ((np.arange(n_masks)[:, None] >> np.arange(d)) & 1).astype(bool)
    values = np.empty(n_masks)
    for start in range(0, n_masks, _EVAL_CHUNK):
        chunk = bits[start : start + _EVAL_CHUNK]
        values[start : start + _EVAL_CHUNK] = np.asarray(
            model(_hybrid_rows(chunk, xi, background)), dtype=float
        ).reshape(-1)

    fact = [math.factorial(k) for k in range(d + 1)]
    coal_weight = np.array(
        [fact[s] * fact[d - s - 1] / fact[d] for s in range(d)]
    )
    sizes = bits.sum(axis=1)
    phi = np.zeros(d)
    mask_ids = np.arange(n_masks)
    for j in range(d):
        without = (mask_ids >> j) & 1 == 0
        s = sizes[without]
        gain = values[mask_ids[without] | (1 << j)] - values[without]
        phi[j] = float(np.sum(coal_weight[s] * gain))
    return ShapExplanation(phi, float(values[0]), xi)


def shap_sampled(
    model: Callable[[np.ndarray], np.ndarray],
    xi: np.ndarray,
    cfg: ShapConfig,
) -> ShapExplanation:
    """Unbiased permutation estimator with antithetic (reversed) pairs.

    Each sampled ordering is paired with its reverse; per-feature standard
    errors are computed over the pair means, which are the independent
    sampling units.
    """
    if cfg.n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    xi = np.asarray(xi, dtype=float)
    d = xi.shape[0]
    background = _background_for(cfg, d)
    rng = substream(cfg.seed, "permutations")

    n_units = (cfg.n_permutations + 1) // 2
    unit_estimates = np.empty((n_units, d))
    base_value = float(np.asarray(model(background[None, :]), dtype=float).reshape(-1)[0])

    def walk(perm: np.ndarray) -> np.ndarray:
        rows = np.tile(background, (d + 1, 1))
        for t, j in enumerate(perm):
            rows[t + 1 :, j] = xi[j]
        vals = np.asarray(model(rows), dtype=float).reshape(-1)
        contrib = np.empty(d)
        contrib[perm] = np.diff(vals)
        return contrib

    total = 0
    for u in range(n_units):
        perm = rng.permutation(d)
        first = walk(perm)
        if total + 2 <= cfg.n_permutations:
            unit_estimates[u] = 0.5 * (first + walk(perm[::-1]))
            total += 2
        else:
            unit_estimates[u] = first
            total += 1

    phi = unit_estimates.mean(axis=0)
    if n_units >= 2:
        se = unit_estimates.std(axis=0, ddof=1) / math.sqrt(n_units)
    else:
        se = np.full(d, np.nan)
    return ShapExplanation(phi, base_value, xi, standard_errors=se)


def shap_linear(
    beta: np.ndarray, intercept: float, xi: np.ndarray, xbar: np.ndarray
) -> ShapExplanation:
    """Closed form for a linear model: phi_j = beta_j * (xi_j - xbar_j)."""
    beta = np.asarray(beta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    if not (beta.shape == xi.shape == xbar.shape):
        raise ValueError("beta, xi, and xbar must have matching shapes")
    phi = beta * (xi - xbar)
    return ShapExplanation(phi, float(beta @ xbar + intercept), xi)


def normalize_shap(
    expl: ShapExplanation,
    xi: np.ndarray,
    xbar: np.ndarray,
    eps_div: float = DEFAULT_EPS_DIV,
) -> NormalizedImportance:
    """Divide each attribution by the feature's displacement from background.

    Entries where |xi_j - xbar_j| <= eps_div are flagged undefined instead
    of being imputed, since any fill-in would fabricate sign information.
    """
    if eps_div <= 0:
        raise ValueError("eps_div must be positive")
    xi = np.asarray(xi, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    disp = xi - xbar
    undefined = np.abs(disp) <= eps_div
    values = np.full(expl.phi.shape, np.nan)
    ok = ~undefined
    values[ok] = expl.phi[ok] / disp[ok]
    return NormalizedImportance(values=values, undefined=undefined)


def mean_abs_shap(explanations: list[ShapExplanation]) -> np.ndarray:
    """Global importance: elementwise mean of absolute attributions."""
    if not explanations:
        raise ValueError("need at least one explanation")
    d = explanations[0].phi.shape[0]
    if any(e.phi.shape[0] != d for e in explanations):
        raise ValueError("explanations disagree on feature count")
    return np.mean([np.abs(e.phi) for e in explanations], axis=0)


def _background_for(cfg: ShapConfig, d: int) -> np.ndarray:
    if cfg.background is None:
        raise ValueError(
            "ShapConfig.background is unset; pass the training feature means"
        )
    background = np.asarray(cfg.background, dtype=float)
    if background.shape != (d,):
        raise ValueError("background must match the instance dimension")
    return background


def explain(
    model: Callable[[np.ndarray], np.ndarray],
    xi: np.ndarray,
    cfg: ShapConfig,
) -> ShapExplanation:
    """Dispatch on cfg.method ('exact' falls back to sampling past 20 features
    when method is 'auto')."""
    method = cfg.method
    if method == "auto":
        method = (
            "exact" if np.asarray(xi).shape[0] <= EXACT_MAX_FEATURES
            else "permutation-sampling"
        )
    if method == "exact":
        return shap_exact(model, xi, cfg)
    if method == "permutation-sampling":
        return shap_sampled(model, xi, cfg)
    raise ValueError(f"unknown attribution method {cfg.method!r}")
