"""Mitigation strategies as composable explanation transformers.

Aggregation over models and seeds trades explanation variance for bias
toward patterns shared across the near-optimal model set; max-normalized
mixing and Borda-count rank aggregation are included as reproducible
baselines even though they buy little, so the comparisons stay replayable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import lime as lime_mod
from . import models as models_mod
from . import shapley
from .datagen import Dataset
from .rng import derive_seed

Explainer = Callable[[models_mod.MlpModel, np.ndarray], np.ndarray]


@dataclass
class EnsembleSpec:
    models: list[models_mod.MlpModel]
    explainers: list[Explainer]
    aggregation: str = "mean"  # "mean" | "borda"
    max_normalize_before_mix: bool = False

    def __post_init__(self):
        if not self.models or not self.explainers:
            raise ValueError("EnsembleSpec needs at least one model and explainer")
        if self.aggregation not in ("mean", "borda"):
            raise ValueError("aggregation must be 'mean' or 'borda'")


def max_normalize(e: np.ndarray) -> np.ndarray:
    """Scale to unit max magnitude; all-zero vectors pass through unchanged."""
    e = np.asarray(e, dtype=float)
    m = np.max(np.abs(e))
    return e if m == 0.0 else e / m


def average_over_models(spec: EnsembleSpec, xi: np.ndarray) -> np.ndarray:
    """Grand mean (or Borda aggregate) of the B x E explanation grid."""
    d = spec.models[0].n_features
    if any(m.n_features != d for m in spec.models):
        raise ValueError("all models must share the feature dimension")
    vectors = []
    for model in spec.models:
        for explainer in spec.explainers:
            e = np.asarray(explainer(model, xi), dtype=float)
            if spec.max_normalize_before_mix:
                e = max_normalize(e)
            vectors.append(e)
    if spec.aggregation == "mean":
        return np.mean(vectors, axis=0)
    ballots = [rank_ballot(v) for v in vectors]
    order = borda_aggregate(ballots)
    # Express the aggregate ranking as importance scores (top gets D).
    scores = np.empty(d)
    scores[order] = np.arange(d, 0, -1)
    return scores


def average_shap_lime(shap_e: np.ndarray, lime_e: np.ndarray) -> np.ndarray:
    """Max-normalize each explanation to a shared scale, then average."""
    shap_e = np.asarray(shap_e, dtype=float)
    lime_e = np.asarray(lime_e, dtype=float)
    if shap_e.shape != lime_e.shape:
        raise ValueError("explanations must have matching shapes")
    return 0.5 * (max_normalize(shap_e) + max_normalize(lime_e))


def rank_ballot(importance: np.ndarray) -> np.ndarray:
    """Feature indices ordered most to least important by magnitude."""
    importance = np.asarray(importance, dtype=float)
    d = importance.shape[0]
    return np.lexsort((np.arange(d), -np.abs(importance)))


def borda_aggregate(rankings: Sequence[np.ndarray]) -> np.ndarray:
    """Borda count: rank r on a ballot earns D - r + 1 points.

    Every candidate scores at least one point per ballot; the aggregate
    orders candidates by total points, ties broken by feature index.
    """
    if not len(rankings):
        raise ValueError("need at least one ballot")
    d = len(rankings[0])
    points = np.zeros(d)
    for ballot in rankings:
        ballot = np.asarray(ballot)
        if sorted(ballot.tolist()) != list(range(d)):
            raise ValueError("each ballot must be a permutation of 0..D-1")
        points[ballot] += np.arange(d, 0, -1)
    return np.lexsort((np.arange(d), -points))


@dataclass
class PipelineConfig:
    """Defaults reproduce the mitigated-pipeline setup at full scale."""

    hidden_grid: Sequence[int] = field(default_factory=models_mod.full_hidden_grid)
    seed_grid: Sequence[int] = field(default_factory=lambda: list(range(1, 11)))
    epsilon_auc: float = 0.02
    n_models: int = 10  # near-best models kept for the lime track
    n_explainer_seeds: int = 10
    lime_nu: float = 10_000.0
    lime_n_samples: int = 10_000
    ridge_lambda: float = lime_mod.DEFAULT_RIDGE_LAMBDA
    shap_n_permutations: int = 64
    train_epochs: int = 150
    master_seed: int = 0


def recommended_pipeline(
    ds: Dataset,
    strategy: str,
    cfg: PipelineConfig,
    instances: np.ndarray,
) -> tuple[np.ndarray, np.ndarray | None, dict]:
    """Mitigated explanations for a batch of instances.

    lime-track: the complexity sweep's near-best simple models, each
    explained by seed-averaged wide-kernel large-sample surrogates, grand
    mean over the model x seed grid.  shap-track: normalized attributions
    of the single selected model (averaging attributions across models
    showed no benefit, so B = E = 1 there).

    Returns (M x D importance matrix, undefined mask or None, manifest).
    """
    if strategy not in ("lime-track", "shap-track"):
        raise ValueError("strategy must be 'lime-track' or 'shap-track'")
    instances = np.atleast_2d(np.asarray(instances, dtype=float))
    selected = models_mod.complexity_sweep(
        ds,
        list(cfg.hidden_grid),
        list(cfg.seed_grid),
        cfg.epsilon_auc,
        epochs=cfg.train_epochs,
        top_k=cfg.n_models,
    )
    manifest: dict = {
        "strategy": strategy,
        "master_seed": cfg.master_seed,
        "epsilon_auc": cfg.epsilon_auc,
        "hidden_grid": list(cfg.hidden_grid),
        "seed_grid": list(cfg.seed_grid),
        "selected_models": [
            {"hidden_nodes": e.hidden_nodes, "seed": e.seed, "test_auc": e.test_auc}
            for e in selected
        ],
    }

    if strategy == "shap-track":
        top = selected[0]
        background = ds.train_X.mean(axis=0)
        use_exact = ds.n_features <= shapley.EXACT_MAX_FEATURES
        rows = []
        masks = []
        for i, xi in enumerate(instances):
            cfg_s = shapley.ShapConfig(
                method="exact" if use_exact else "permutation-sampling",
                background=background,
                n_permutations=cfg.shap_n_permutations,
                seed=derive_seed(cfg.master_seed, "shap", i),
            )
            expl = shapley.explain(top.model.predict_proba, xi, cfg_s)
            norm = shapley.normalize_shap(expl, xi, background)
            rows.append(norm.values)
            masks.append(norm.undefined)
        manifest["explainer"] = {
            "kind": "normalized-shap",
            "method": "exact" if use_exact else "permutation-sampling",
            "n_permutations": None if use_exact else cfg.shap_n_permutations,
            "b_models": 1,
            "e_explainers": 1,
        }
        return np.array(rows), np.array(masks), manifest

    rows = []
    for i, xi in enumerate(instances):
        per_model = []
        for m_idx, entry in enumerate(selected):
            cfg_l = lime_mod.LimeConfig(
                nu=cfg.lime_nu,
                n_samples=cfg.lime_n_samples,
                ridge_lambda=cfg.ridge_lambda,
                seed=derive_seed(cfg.master_seed, "lime", m_idx, i),
            )
            avg = lime_mod.explain_averaged(
                entry.model.predict_proba, xi, cfg_l, cfg.n_explainer_seeds
            )
            per_model.append(avg.coefficients)
        rows.append(np.mean(per_model, axis=0))
    manifest["explainer"] = {
        "kind": "seed-averaged-lime",
        "nu": cfg.lime_nu,
        "n_samples": cfg.lime_n_samples,
        "b_models": len(selected),
        "e_explainers": cfg.n_explainer_seeds,
    }
    return np.array(rows), None, manifest
