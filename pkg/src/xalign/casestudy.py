"""Home-loan case study: baseline versus mitigated explanation pipelines.

The ground truth is a published logistic-regression coefficient set over 12
application features; it is taken as given, never re-estimated.  A loader
validates and standardizes the real CSV when available; a synthetic
fallback draws features within the documented ranges and labels rows with
the same coefficients, so the full comparison runs anywhere.  Results on
the fallback are labeled as synthetic in every manifest.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import lime as lime_mod
from . import metrics, mitigate, models, shapley, stats
from .datagen import Dataset, sigmoid
from .rng import derive_seed, substream

ECON_INTERCEPT = 0.8
ECON_COEFFICIENTS = {
    "good_credit": 3.5,
    "purchaser_type": 4.7,
    "pmi_approved": -4.4,
    "multi_family": -0.4,
    "unver": -2.5,
    "fixed_rate": 0.9,
    "bankruptcy": -1.4,
    "value_rate": -0.9,
    "debt_rate": -0.03,
    "old": -0.7,
    "married": 0.8,
    "gift": -0.8,
}

# (kind, range) per feature; purchaser type is a single ordinal column and
# multi_family is treated as binary per its meaning.
FEATURE_RANGES: dict[str, tuple[str, tuple[float, float]]] = {
    "good_credit": ("binary", (0, 1)),
    "purchaser_type": ("ordinal", (0, 9)),
    "pmi_approved": ("binary", (0, 1)),
    "multi_family": ("binary", (0, 1)),
    "unver": ("binary", (0, 1)),
    "fixed_rate": ("binary", (0, 1)),
    "bankruptcy": ("binary", (0, 1)),
    "value_rate": ("binary", (0, 1)),
    "debt_rate": ("continuous", (0, 100)),
    "old": ("binary", (0, 1)),
    "married": ("binary", (0, 1)),
    "gift": ("binary", (0, 1)),
}

FEATURE_ORDER = list(ECON_COEFFICIENTS)

# Synthetic marginals, chosen inside the documented ranges so that roughly
# half of the generated applications are approved.
_SYNTH_BERNOULLI_P = {
    "good_credit": 0.55,
    "pmi_approved": 0.5,
    "multi_family": 0.15,
    "unver": 0.3,
    "fixed_rate": 0.6,
    "bankruptcy": 0.15,
    "value_rate": 0.4,
    "old": 0.5,
    "married": 0.6,
    "gift": 0.25,
}
_SYNTH_PURCHASER_P0 = 0.8
_SYNTH_DEBT_MEAN = 35.0
_SYNTH_DEBT_SD = 12.0


class CaseDataError(ValueError):
    """Input CSV failed schema or range validation."""


@dataclass
class EconGroundTruth:
    intercept: float = ECON_INTERCEPT
    coefficients: dict[str, float] = field(
        default_factory=lambda: dict(ECON_COEFFICIENTS)
    )
    feature_ranges: dict[str, tuple[str, tuple[float, float]]] = field(
        default_factory=lambda: dict(FEATURE_RANGES)
    )

    def beta_vector(self, names: Sequence[str]) -> np.ndarray:
        return np.array([self.coefficients[n] for n in names])


def _validate_rows(rows: np.ndarray, names: list[str]) -> None:
    problems: list[str] = []
    for j, name in enumerate(names):
        kind, (lo, hi) = FEATURE_RANGES[name]
        col = rows[:, j]
        if kind == "binary":
            bad = np.where((col != 0) & (col != 1))[0]
        elif kind == "ordinal":
            bad = np.where((col < lo) | (col > hi) | (col != np.round(col)))[0]
        else:
            bad = np.where((col < lo) | (col > hi))[0]
        for i in bad[:20]:
            problems.append(f"row {int(i)}: {name}={col[i]:g} outside {kind} range [{lo:g}, {hi:g}]")
        if len(bad) > 20:
            problems.append(f"... and {len(bad) - 20} more rows for {name}")
    if problems:
        raise CaseDataError("; ".join(problems))


def _standardize_and_split(
    raw: np.ndarray, y: np.ndarray, seed: int, source: str
) -> Dataset:
    n = raw.shape[0]
    perm = substream(seed, "split").permutation(n)
    n_test = int(round(n * 0.2))
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    mu = raw[train_idx].mean(axis=0)
    sd = raw[train_idx].std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    Z = (raw - mu) / sd
    manifest = {
        "generator": source,
        "seed": int(seed),
        "n_rows": int(n),
        "feature_names": list(FEATURE_ORDER),
        "means": [float(v) for v in mu],
        "sds": [float(v) for v in sd],
        "intercept": ECON_INTERCEPT,
        "coefficients": {k: float(v) for k, v in ECON_COEFFICIENTS.items()},
        "beta": {k: float(v) for k, v in ECON_COEFFICIENTS.items()},
        "train_idx": [int(i) for i in train_idx],
        "test_idx": [int(i) for i in test_idx],
        "synthetic": source != "case_real",
    }
    return Dataset(
        X=Z,
        y=y.astype(np.int8),
        feature_names=list(FEATURE_ORDER),
        feature_means=mu,
        feature_sds=sd,
        train_idx=train_idx,
        test_idx=test_idx,
        manifest=manifest,
        X_raw=raw,
    )


def load_case_data(path, seed: int = 0) -> tuple[Dataset, EconGroundTruth]:
    """Read, validate, standardize, and split the home-loan CSV.

    The file must carry the 12 documented feature columns plus a trailing
    ``label`` column of 0/1 outcomes.  Out-of-range values are reported
    with their row indices.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader]
    missing = [c for c in FEATURE_ORDER + ["label"] if c not in header]
    if missing:
        raise CaseDataError(f"missing columns: {missing}")
    arr = np.array(data)
    cols = {name: header.index(name) for name in FEATURE_ORDER}
    raw = np.column_stack([arr[:, cols[name]] for name in FEATURE_ORDER])
    y = arr[:, header.index("label")]
    if not np.all((y == 0) | (y == 1)):
        raise CaseDataError("label column must be 0/1")
    _validate_rows(raw, FEATURE_ORDER)
    return _standardize_and_split(raw, y, seed, "case_real"), EconGroundTruth()


def synth_case_data(n_rows: int, seed: int) -> tuple[Dataset, EconGroundTruth]:
    """Synthetic stand-in: features within the documented ranges, labels by
    thresholding the sigmoid of the published coefficients on raw values."""
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    rng = substream(seed, "feature")
    cols: dict[str, np.ndarray] = {}
    for name, p in _SYNTH_BERNOULLI_P.items():
        cols[name] = (rng.uniform(size=n_rows) < p).astype(float)
    pt = np.where(
        rng.uniform(size=n_rows) < _SYNTH_PURCHASER_P0,
        0.0,
        rng.integers(1, 10, size=n_rows).astype(float),
    )
    cols["purchaser_type"] = pt
    cols["debt_rate"] = np.clip(
        rng.normal(_SYNTH_DEBT_MEAN, _SYNTH_DEBT_SD, size=n_rows), 0.0, 100.0
    )
    raw = np.column_stack([cols[name] for name in FEATURE_ORDER])
    coef = np.array([ECON_COEFFICIENTS[n] for n in FEATURE_ORDER])
    index = ECON_INTERCEPT + raw @ coef
    y = (sigmoid(index) >= 0.5).astype(np.int8)
    return _standardize_and_split(raw, y, seed, "case_synthetic"), EconGroundTruth()


@dataclass
class CaseStudyConfig:
    """Full-scale defaults; shrink the grid for quick runs."""

    pipeline: mitigate.PipelineConfig = field(default_factory=mitigate.PipelineConfig)
    baseline_hidden: int = 100
    baseline_target_auc: float = 0.93
    baseline_tolerance: float = 0.02
    baseline_max_epochs: int = 400
    m_instances: int = 100
    lime_default_n_samples: int = lime_mod.DEFAULT_N_SAMPLES


@dataclass
class TrackComparison:
    track: str
    baseline_report: metrics.AlignmentReport
    mitigated_report: metrics.AlignmentReport
    verdicts: dict[str, stats.ImprovementVerdict]


@dataclass
class CaseStudyResult:
    tracks: dict[str, TrackComparison]
    manifest: dict


def improvement_verdicts(
    old: metrics.InstanceScores,
    new: metrics.InstanceScores,
    feature_names: list[str],
) -> dict[str, stats.ImprovementVerdict]:
    return {
        "directionality": stats.test_improvement(
            old.sign_scores.T, new.sign_scores.T,
            metric="directionality", deltas=list(feature_names),
        ),
        "concordance": stats.test_improvement(
            old.concordance, new.concordance, metric="concordance",
            deltas=["all-features"],
        ),
        "relevance": stats.test_improvement(
            old.relevance, new.relevance, metric="relevance",
            deltas=[f"k={k}" for k in old.ks],
        ),
    }


def run_case_study(
    ds: Dataset,
    gt: EconGroundTruth,
    master_seed: int,
    cfg: CaseStudyConfig | None = None,
) -> CaseStudyResult:
    """Baseline single-model default explainers versus mitigated pipelines.

    Both arms consume the identical test instances (matched pairs), so the
    verdicts are paired Wilcoxon outcomes per metric and track.
    """
    cfg = cfg or CaseStudyConfig()
    cfg.pipeline.master_seed = master_seed
    beta = gt.beta_vector(ds.feature_names)
    m = min(cfg.m_instances, len(ds.test_idx))
    pick = substream(master_seed, "instances").choice(len(ds.test_idx), m, replace=False)
    instances = ds.test_X[np.sort(pick)]
    background = ds.train_X.mean(axis=0)

    baseline_model = models.train_to_target(
        ds,
        cfg.baseline_hidden,
        models.PerformanceTarget(
            cfg.baseline_target_auc, cfg.baseline_tolerance, cfg.baseline_max_epochs
        ),
        seed=derive_seed(master_seed, "baseline-model"),
    )

    use_exact = ds.n_features <= shapley.EXACT_MAX_FEATURES
    shap_rows = []
    lime_rows = []
    for i, xi in enumerate(instances):
        scfg = shapley.ShapConfig(
            method="exact" if use_exact else "permutation-sampling",
            background=background,
            seed=derive_seed(master_seed, "baseline-shap", i),
        )
        shap_rows.append(shapley.explain(baseline_model.predict_proba, xi, scfg).phi)
        lcfg = lime_mod.LimeConfig(
            n_samples=cfg.lime_default_n_samples,
            seed=derive_seed(master_seed, "baseline-lime", i),
        )
        lime_rows.append(lime_mod.explain(baseline_model.predict_proba, xi, lcfg).coefficients)
    baseline = {"shap": np.array(shap_rows), "lime": np.array(lime_rows)}

    mitigated: dict[str, tuple[np.ndarray, np.ndarray | None, dict]] = {
        "shap": mitigate.recommended_pipeline(ds, "shap-track", cfg.pipeline, instances),
        "lime": mitigate.recommended_pipeline(ds, "lime-track", cfg.pipeline, instances),
    }

    tracks: dict[str, TrackComparison] = {}
    for track in ("shap", "lime"):
        old_scores = metrics.per_instance_scores(baseline[track], beta)
        new_e, new_mask, _ = mitigated[track]
        new_scores = metrics.per_instance_scores(new_e, beta, undefined_mask=new_mask)
        tracks[track] = TrackComparison(
            track=track,
            baseline_report=metrics.evaluate(
                baseline[track], beta, feature_names=ds.feature_names
            ),
            mitigated_report=metrics.evaluate(
                new_e, beta, undefined_mask=new_mask, feature_names=ds.feature_names
            ),
            verdicts=improvement_verdicts(old_scores, new_scores, ds.feature_names),
        )

    manifest = {
        "master_seed": master_seed,
        "data": ds.manifest,
        "m_instances": m,
        "instance_rows": [int(ds.test_idx[i]) for i in np.sort(pick)],
        "baseline_model": {
            "hidden_nodes": cfg.baseline_hidden,
            "target_auc": cfg.baseline_target_auc,
            "tolerance": cfg.baseline_tolerance,
            "test_auc": baseline_model.training_log[-1]["test_auc"],
            "accuracy_threshold": 0.5,
        },
        "pipelines": {t: mitigated[t][2] for t in mitigated},
    }
    return CaseStudyResult(tracks=tracks, manifest=manifest)
