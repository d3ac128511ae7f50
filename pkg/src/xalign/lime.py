"""Local surrogate explainer built from first principles.

Draws a Gaussian neighborhood around the instance, weights each sample with
an exponential kernel on its squared distance, and fits a weighted ridge
surrogate whose slope coefficients are the explanation.  The ridge penalty
applies to slopes only; the intercept is absorbed by weighted centering.
Quartile discretization (binary same-bin-as-the-instance indicators) is
available but off by default because it destroys gradient information.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.linalg

from .rng import substream

DEFAULT_N_SAMPLES = 1000
DEFAULT_RIDGE_LAMBDA = 1.0


class SingularSystemError(RuntimeError):
    """Unpenalized weighted least squares hit a singular normal system."""


def default_bandwidth(n_features: int) -> float:
    return 0.75 * math.sqrt(n_features)


@dataclass(frozen=True, eq=False)
class LimeConfig:
    """Knobs of one surrogate fit; ``nu=None`` means 0.75*sqrt(D)."""

    nu: float | None = None
    n_samples: int = DEFAULT_N_SAMPLES
    discretize: bool = False
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA
    seed: int = 0
    quartiles: np.ndarray | None = None  # 3 x D cutpoints, training-derived

    def bandwidth(self, n_features: int) -> float:
        nu = self.nu if self.nu is not None else default_bandwidth(n_features)
        if nu <= 0:
            raise ValueError("bandwidth nu must be positive")
        return nu


@dataclass
class LimeExplanation:
    coefficients: np.ndarray
    intercept: float
    instance: np.ndarray
    config: LimeConfig
    weights_underflowed: bool = False


def sample_neighborhood(xi: np.ndarray, n: int, seed: int) -> np.ndarray:
    """n i.i.d. rows from a unit-variance Gaussian centered at the instance."""
    if n < 1:
        raise ValueError("n must be >= 1")
    xi = np.asarray(xi, dtype=float)
    rng = substream(seed, "neighborhood")
    return xi + rng.standard_normal((n, xi.shape[0]))


def kernel_weights(xi: np.ndarray, X: np.ndarray, nu: float) -> np.ndarray:
    """exp(-||xi - x||^2 / (2 nu^2)) for each row of X."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    sq = np.sum((np.asarray(X, dtype=float) - np.asarray(xi, dtype=float)) ** 2, axis=1)
    return np.exp(-sq / (2.0 * nu * nu))


def fit_weighted_ridge(
    X: np.ndarray, y: np.ndarray, weights: np.ndarray, lam: float
) -> np.ndarray:
    """Solve (X'WX + lam I) u = X'Wy without forming an explicit inverse.

    Cholesky on the regularized Gram matrix, falling back to a pivoted LU
    solve if the factorization fails; a singular system with lam == 0 is an
    explicit error.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    if X.shape[0] != y.shape[0] or X.shape[0] != w.shape[0]:
        raise ValueError("X, y, and weights must agree on the sample count")
    Xw = X * w[:, None]
    gram = X.T @ Xw + lam * np.eye(X.shape[1])
    rhs = Xw.T @ y
    try:
        c, low = scipy.linalg.cho_factor(gram)
        return scipy.linalg.cho_solve((c, low), rhs)
    except scipy.linalg.LinAlgError:
        try:
            return scipy.linalg.solve(gram, rhs)
        except scipy.linalg.LinAlgError as exc:
            raise SingularSystemError(
                "normal system is singular; a positive ridge penalty is needed"
            ) from exc


def _discretize(
    samples: np.ndarray, xi: np.ndarray, quartiles: np.ndarray
) -> np.ndarray:
    """Binary design: 1 where a sample falls in the instance's quartile bin."""
    d = samples.shape[1]
    design = np.empty_like(samples)
    for j in range(d):
        cuts = quartiles[:, j]
        xi_bin = np.searchsorted(cuts, xi[j], side="right")
        bins = np.searchsorted(cuts, samples[:, j], side="right")
        design[:, j] = (bins == xi_bin).astype(float)
    return design


def training_quartiles(train_X: np.ndarray) -> np.ndarray:
    """25/50/75-percentile cutpoints per feature, shape 3 x D."""
    return np.percentile(np.asarray(train_X, dtype=float), [25, 50, 75], axis=0)


def explain(
    model: Callable[[np.ndarray], np.ndarray],
    xi: np.ndarray,
    cfg: LimeConfig,
) -> LimeExplanation:
    """Fit the weighted ridge surrogate to the model around the instance.

    When every kernel weight underflows to zero the pure-penalty solution
    (all-zero coefficients) is returned with ``weights_underflowed`` set
    rather than failing.
    """
    xi = np.asarray(xi, dtype=float)
    d = xi.shape[0]
    nu = cfg.bandwidth(d)
    samples = sample_neighborhood(xi, cfg.n_samples, cfg.seed)
    outputs = np.asarray(model(samples), dtype=float).reshape(-1)
    if outputs.shape[0] != samples.shape[0]:
        raise ValueError("model must return one output per sampled row")
    w = kernel_weights(xi, samples, nu)

    if cfg.discretize:
        if cfg.quartiles is None:
            raise ValueError("discretize=True requires training quartiles in cfg")
        design = _discretize(samples, xi, np.asarray(cfg.quartiles, dtype=float))
    else:
        design = samples

    total = w.sum()
    if total == 0.0:
        warnings.warn(
            "all kernel weights underflowed to zero; returning the "
            "pure-penalty solution",
            RuntimeWarning,
            stacklevel=2,
        )
        return LimeExplanation(np.zeros(d), 0.0, xi, cfg, weights_underflowed=True)

    # Weighted centering keeps the intercept out of the penalty.
    x_bar = (w[:, None] * design).sum(axis=0) / total
    y_bar = float((w * outputs).sum() / total)
    coef = fit_weighted_ridge(design - x_bar, outputs - y_bar, w, cfg.ridge_lambda)
    intercept = y_bar - float(x_bar @ coef)
    return LimeExplanation(coef, intercept, xi, cfg)


def explain_averaged(
    model: Callable[[np.ndarray], np.ndarray],
    xi: np.ndarray,
    cfg: LimeConfig,
    n_seeds: int,
) -> LimeExplanation:
    """Average coefficients of n_seeds explainers seeded seed, seed+1, ..."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    parts = [
        explain(model, xi, replace(cfg, seed=cfg.seed + i)) for i in range(n_seeds)
    ]
    coef = np.mean([p.coefficients for p in parts], axis=0)
    intercept = float(np.mean([p.intercept for p in parts]))
    return LimeExplanation(
        coef,
        intercept,
        np.asarray(xi, dtype=float),
        cfg,
        weights_underflowed=any(p.weights_underflowed for p in parts),
    )
