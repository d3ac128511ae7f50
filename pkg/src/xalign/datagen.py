"""Synthetic tabular data with fully known ground truth.

Each generator builds a structural model over logical features (some
exogenous, some functions of their parents), samples raw values, expands
categoricals to one-hot columns, standardizes on the training split, and
labels rows by thresholding a sigmoid of a known linear index.  Marginal
effects are the index coefficients for exogenous features and interventional
total derivatives (Monte-Carlo central differences through the structural
equations) for features with descendants.

Distribution notation: sampling rules such as ``normal(40000, 30000)`` read
(mean, sd).  Gaussian noise terms originally quoted as variances are stored
as sds here (label noise sd 0.5, cosigner link noise sd sqrt(0.5)).
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rng import substream

TEST_FRACTION = 0.2

# Internal protocol for derived marginal effects: fixed so every dataset from
# the same generator reports identical beta regardless of its sampling seed.
_BETA_MC_SAMPLES = 400_000
_BETA_MC_STEP = 0.1
_BETA_MC_SEED = 20_240_501


class StructuralFaultError(RuntimeError):
    """A structural equation produced non-finite values."""


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float)))


# ---------------------------------------------------------------------------
# Structural model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureSpec:
    """One logical feature: its kind, sampling rule, and parents."""

    name: str
    kind: str  # "continuous" | "binary" | "categorical"
    distribution: str  # human-readable sampling rule
    depends_on: tuple[str, ...] = ()
    levels: tuple[str, ...] = ()  # categorical one-hot column order


@dataclass(frozen=True)
class Node:
    """A feature's spec plus its executable sampling machinery.

    ``noise`` draws the node's exogenous randomness (may be multi-column);
    ``fn`` maps (parent values, noise) to the feature value.  Keeping the
    randomness separate from the mapping lets interventions re-propagate
    descendants while reusing the original noise draws.
    """

    spec: FeatureSpec
    noise: Callable[[np.random.Generator, int], np.ndarray] | None
    fn: Callable[[dict[str, np.ndarray], np.ndarray | None], np.ndarray]


class StructuralModel:
    """Acyclic system of feature equations in topological order."""

    def __init__(self, nodes: list[Node]):
        seen: set[str] = set()
        for node in nodes:
            missing = [p for p in node.spec.depends_on if p not in seen]
            if missing:
                raise ValueError(
                    f"feature {node.spec.name!r} depends on {missing} "
                    "before they are defined (graph must be acyclic)"
                )
            seen.add(node.spec.name)
        self.nodes = list(nodes)

    @property
    def feature_specs(self) -> list[FeatureSpec]:
        return [n.spec for n in self.nodes]

    @property
    def dependency_edges(self) -> list[tuple[str, str]]:
        return [
            (parent, node.spec.name)
            for node in self.nodes
            for parent in node.spec.depends_on
        ]

    def sample(
        self, n: int, seed: int
    ) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        """Draw n rows; returns (values, noises) keyed by feature name."""
        values: dict[str, np.ndarray] = {}
        noises: dict[str, np.ndarray] = {}
        for node in self.nodes:
            eps = None
            if node.noise is not None:
                eps = node.noise(substream(seed, "feature", node.spec.name), n)
                noises[node.spec.name] = eps
            parents = {p: values[p] for p in node.spec.depends_on}
            values[node.spec.name] = np.asarray(node.fn(parents, eps), dtype=float)
        return values, noises

    def propagate(
        self,
        base: dict[str, np.ndarray],
        noises: dict[str, np.ndarray],
        overrides: dict[str, np.ndarray],
    ) -> dict[str, np.ndarray]:
        """Recompute all features with some values forced, reusing noise."""
        out: dict[str, np.ndarray] = {}
        for node in self.nodes:
            name = node.spec.name
            if name in overrides:
                out[name] = overrides[name]
            elif node.spec.depends_on:
                parents = {p: out[p] for p in node.spec.depends_on}
                out[name] = np.asarray(node.fn(parents, noises.get(name)), dtype=float)
            else:
                out[name] = base[name]
        return out


# ---------------------------------------------------------------------------
# Ground truth and datasets
# ---------------------------------------------------------------------------


@dataclass
class GroundTruth:
    """The hidden labeling process: a linear index over the feature columns.

    ``standardized_index=True`` (the default for every built-in generator)
    means the coefficients apply to standardized columns, so marginal
    effects are reported per standardized unit and equal the coefficients
    whenever the dependency graph is empty.  With ``False`` the index and
    the effects live on raw feature units.
    """

    intercept: float
    coefficients: dict[str, float]  # per expanded column
    noise_sd: float
    model: StructuralModel
    beta: dict[str, float] = field(default_factory=dict)
    beta_se: dict[str, float] = field(default_factory=dict)
    hidden_features: tuple[str, ...] = ()  # in the labels, absent from X
    standardized_index: bool = True

    @property
    def dependency_edges(self) -> list[tuple[str, str]]:
        return self.model.dependency_edges

    def coefficient_vector(self, names: list[str]) -> np.ndarray:
        return np.array([self.coefficients[n] for n in names])

    def beta_vector(self, names: list[str]) -> np.ndarray:
        return np.array([self.beta[n] for n in names])


@dataclass
class Dataset:
    """Standardized design matrix, labels, and the bookkeeping to undo it."""

    X: np.ndarray  # N x D, standardized with training-split stats
    y: np.ndarray  # N ints in {0, 1}
    feature_names: list[str]
    feature_means: np.ndarray
    feature_sds: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    manifest: dict
    X_raw: np.ndarray | None = None
    label_noise: np.ndarray | None = None

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def train_X(self) -> np.ndarray:
        return self.X[self.train_idx]

    @property
    def train_y(self) -> np.ndarray:
        return self.y[self.train_idx]

    @property
    def test_X(self) -> np.ndarray:
        return self.X[self.test_idx]

    @property
    def test_y(self) -> np.ndarray:
        return self.y[self.test_idx]

    def unstandardize(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.feature_sds + self.feature_means


def _split_indices(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = substream(seed, "split").permutation(n)
    n_test = int(round(n * TEST_FRACTION))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def _expand_columns(
    model: StructuralModel, values: dict[str, np.ndarray]
) -> tuple[list[str], np.ndarray, list[str]]:
    """One-hot expand categoricals; returns (column names, matrix, skipped)."""
    names: list[str] = []
    cols: list[np.ndarray] = []
    for spec in model.feature_specs:
        v = values[spec.name]
        if spec.kind == "categorical":
            for i, level in enumerate(spec.levels):
                names.append(f"{spec.name}={level}")
                cols.append((v == i).astype(float))
        else:
            names.append(spec.name)
            cols.append(v)
    return names, np.column_stack(cols), names


def column_names(model: StructuralModel, hidden: tuple[str, ...] = ()) -> list[str]:
    names: list[str] = []
    for spec in model.feature_specs:
        if spec.name in hidden:
            continue
        if spec.kind == "categorical":
            names.extend(f"{spec.name}={level}" for level in spec.levels)
        else:
            names.append(spec.name)
    return names


def _assemble(
    generator_id: str,
    model: StructuralModel,
    gt: GroundTruth,
    n_rows: int,
    seed: int,
    params: dict | None = None,
    label_flipper: Callable[[np.ndarray, np.ndarray, int], np.ndarray] | None = None,
) -> tuple[Dataset, GroundTruth]:
    """Sample, standardize on the training split, and label."""
    values, _ = model.sample(n_rows, seed)
    all_names, raw_all, _ = _expand_columns(model, values)

    train_idx, test_idx = _split_indices(n_rows, seed)
    mu = raw_all[train_idx].mean(axis=0)
    sd = raw_all[train_idx].std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    Z = (raw_all - mu) / sd

    coef = np.array([gt.coefficients[name] for name in all_names])
    noise = np.zeros(n_rows)
    if gt.noise_sd > 0:
        noise = substream(seed, "label").normal(0.0, gt.noise_sd, size=n_rows)
    index_features = Z if gt.standardized_index else raw_all
    index = gt.intercept + index_features @ coef + noise
    y = (sigmoid(index) >= 0.5).astype(np.int8)
    if label_flipper is not None:
        y = label_flipper(index - noise, y, seed)

    # Hidden features participate in labeling but are dropped from X.
    visible = [i for i, name in enumerate(all_names) if name not in gt.hidden_features]
    names = [all_names[i] for i in visible]

    manifest = {
        "generator": generator_id,
        "seed": int(seed),
        "n_rows": int(n_rows),
        "params": params or {},
        "feature_names": names,
        "means": [float(v) for v in mu[visible]],
        "sds": [float(v) for v in sd[visible]],
        "intercept": gt.intercept,
        "coefficients": {k: float(v) for k, v in gt.coefficients.items()},
        "beta": {k: float(v) for k, v in gt.beta.items()},
        "noise_sd": gt.noise_sd,
        "dependency_edges": gt.dependency_edges,
        "hidden_features": list(gt.hidden_features),
        "one_hot": {
            s.name: list(s.levels)
            for s in model.feature_specs
            if s.kind == "categorical"
        },
        "train_idx": [int(i) for i in train_idx],
        "test_idx": [int(i) for i in test_idx],
    }
    ds = Dataset(
        X=Z[:, visible],
        y=y,
        feature_names=names,
        feature_means=mu[visible],
        feature_sds=sd[visible],
        train_idx=train_idx,
        test_idx=test_idx,
        manifest=manifest,
        X_raw=raw_all[:, visible],
        label_noise=noise,
    )
    return ds, gt


# ---------------------------------------------------------------------------
# Marginal effects
# ---------------------------------------------------------------------------


@dataclass
class MarginalEffects:
    beta: dict[str, float]
    se: dict[str, float]


def compute_marginal_effects(
    gt: GroundTruth,
    mc_samples: int = _BETA_MC_SAMPLES,
    step: float = _BETA_MC_STEP,
    seed: int = _BETA_MC_SEED,
) -> MarginalEffects:
    """Marginal effects of each column of the generated design matrix.

    For a structural model with no dependency edges the effects equal the
    index coefficients exactly.  Otherwise each non-categorical feature is
    shifted by +-step/2 raw units with the exogenous noise held fixed, all
    descendants are re-propagated, and the central difference of the mean
    index is scaled by the feature's sd so the result is per standardized
    unit, directly comparable to the coefficients.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    model = gt.model
    if not model.dependency_edges:
        return MarginalEffects(
            beta=dict(gt.coefficients), se={k: 0.0 for k in gt.coefficients}
        )

    values, noises = model.sample(mc_samples, seed)
    all_names, raw, _ = _expand_columns(model, values)
    if gt.standardized_index:
        mu = raw.mean(axis=0)
        sd = raw.std(axis=0)
        sd = np.where(sd == 0.0, 1.0, sd)
    else:
        mu = np.zeros(raw.shape[1])
        sd = np.ones(raw.shape[1])
    coef = np.array([gt.coefficients[n] for n in all_names])
    scale = coef / sd  # index change per raw unit of each column

    def index_of(vals: dict[str, np.ndarray]) -> np.ndarray:
        _, mat, _ = _expand_columns(model, vals)
        return (mat - mu) @ scale

    beta: dict[str, float] = {}
    se: dict[str, float] = {}
    col_pos = {name: i for i, name in enumerate(all_names)}
    for node in model.nodes:
        spec = node.spec
        if spec.kind == "categorical":
            if spec.depends_on or any(
                spec.name in other.spec.depends_on for other in model.nodes
            ):
                raise StructuralFaultError(
                    f"categorical feature {spec.name!r} cannot sit on a "
                    "dependency path"
                )
            for level in spec.levels:
                name = f"{spec.name}={level}"
                beta[name] = gt.coefficients[name]
                se[name] = 0.0
            continue
        base = values[spec.name]
        hi = model.propagate(values, noises, {spec.name: base + step / 2.0})
        lo = model.propagate(values, noises, {spec.name: base - step / 2.0})
        diff = (index_of(hi) - index_of(lo)) / step * sd[col_pos[spec.name]]
        if not np.all(np.isfinite(diff)):
            raise StructuralFaultError(
                f"non-finite marginal effect for {spec.name!r}"
            )
        beta[spec.name] = float(diff.mean())
        se[spec.name] = float(diff.std(ddof=1) / math.sqrt(len(diff)))
    return MarginalEffects(beta=beta, se=se)


# ---------------------------------------------------------------------------
# Node builders
# ---------------------------------------------------------------------------


def _uniform(name: str, lo: float, hi: float) -> Node:
    return Node(
        FeatureSpec(name, "continuous", f"uniform({lo},{hi})"),
        lambda rng, n, lo=lo, hi=hi: rng.uniform(lo, hi, size=n),
        lambda parents, eps: eps,
    )


def _int_uniform(name: str, lo: int, hi: int) -> Node:
    return Node(
        FeatureSpec(name, "continuous", f"integer-uniform({lo},{hi})"),
        lambda rng, n, lo=lo, hi=hi: rng.integers(lo, hi + 1, size=n).astype(float),
        lambda parents, eps: eps,
    )


def _bernoulli(name: str, p: float) -> Node:
    return Node(
        FeatureSpec(name, "binary", f"bernoulli({p})"),
        lambda rng, n, p=p: (rng.uniform(size=n) < p).astype(float),
        lambda parents, eps: eps,
    )


def _normal(name: str, mean: float, sd: float) -> Node:
    return Node(
        FeatureSpec(name, "continuous", f"normal({mean},{sd})"),
        lambda rng, n, mean=mean, sd=sd: rng.normal(mean, sd, size=n),
        lambda parents, eps: eps,
    )


def _categorical(name: str, levels: tuple[str, ...]) -> Node:
    k = len(levels)
    return Node(
        FeatureSpec(name, "categorical", f"uniform-categorical({k})", levels=levels),
        lambda rng, n, k=k: rng.integers(0, k, size=n).astype(float),
        lambda parents, eps: eps,
    )


def _fico_score(hist: np.ndarray, inq: np.ndarray, dlq: np.ndarray, util: np.ndarray):
    return (
        650.0
        + (10.0 + 2.5 * hist)
        + (70.0 - 15.0 * inq)
        + (35.0 - 4.0 * dlq)
        + (105.0 - 100.0 * util)
    )


_COSIGNER_LINK_SD = math.sqrt(0.5)
LABEL_NOISE_SD = 0.5

LOAN_COEFFICIENTS = {
    "age": 0.0005,
    "sex": 0.0,
    "married": 0.1,
    "cosigner": 0.25,
    "credit_history": 1.5,
    "income": 3.0,
    "utilization": -1.0,
    "delinquencies": -0.75,
    "inquiries": -0.5,
    "credit_score": 5.0,
}
LOAN_INTERCEPT = 2.5


def _loan_exogenous_nodes() -> dict[str, Node]:
    return {
        "age": _uniform("age", 18, 100),
        "sex": _bernoulli("sex", 0.5),
        "married": _bernoulli("married", 0.5),
        # Credit-history months: the scoring formula consumes it but the
        # source table omits a sampling rule, so one is fixed here.
        "credit_history": _int_uniform("credit_history", 0, 60),
        "income": _normal("income", 40_000, 30_000),
        "utilization": _uniform("utilization", 0, 1),
        "delinquencies": _int_uniform("delinquencies", 0, 24),
        "inquiries": _int_uniform("inquiries", 0, 6),
    }


def _cosigner_dependent() -> Node:
    def noise(rng: np.random.Generator, n: int) -> np.ndarray:
        return np.column_stack(
            [rng.uniform(size=n), rng.normal(0.0, _COSIGNER_LINK_SD, size=n)]
        )

    def fn(parents: dict[str, np.ndarray], eps: np.ndarray) -> np.ndarray:
        p = sigmoid(2.0 * parents["married"] + 1.0 + eps[:, 1])
        return (eps[:, 0] < p).astype(float)

    return Node(
        FeatureSpec(
            "cosigner", "binary", "bernoulli(sigmoid(2*married+1+eps))", ("married",)
        ),
        noise,
        fn,
    )


def _cosigner_exogenous() -> Node:
    # Same marginal as the dependent variant, driven by an independent copy
    # of the marital indicator so the married->cosigner edge disappears.
    def noise(rng: np.random.Generator, n: int) -> np.ndarray:
        return np.column_stack(
            [
                rng.uniform(size=n),
                (rng.uniform(size=n) < 0.5).astype(float),
                rng.normal(0.0, _COSIGNER_LINK_SD, size=n),
            ]
        )

    def fn(parents: dict[str, np.ndarray], eps: np.ndarray) -> np.ndarray:
        p = sigmoid(2.0 * eps[:, 1] + 1.0 + eps[:, 2])
        return (eps[:, 0] < p).astype(float)

    return Node(
        FeatureSpec("cosigner", "binary", "bernoulli(marginal of cosigner link)"),
        noise,
        fn,
    )


def _score_dependent() -> Node:
    def fn(parents: dict[str, np.ndarray], eps) -> np.ndarray:
        return _fico_score(
            parents["credit_history"],
            parents["inquiries"],
            parents["delinquencies"],
            parents["utilization"],
        )

    return Node(
        FeatureSpec(
            "credit_score",
            "continuous",
            "fico(credit_history, inquiries, delinquencies, utilization)",
            ("credit_history", "inquiries", "delinquencies", "utilization"),
        ),
        None,
        fn,
    )


def _score_exogenous() -> Node:
    # Independent copies of the scoring inputs give an exogenous score with
    # the same marginal distribution.
    def noise(rng: np.random.Generator, n: int) -> np.ndarray:
        return np.column_stack(
            [
                rng.integers(0, 61, size=n).astype(float),
                rng.integers(0, 7, size=n).astype(float),
                rng.integers(0, 25, size=n).astype(float),
                rng.uniform(0, 1, size=n),
            ]
        )

    def fn(parents: dict[str, np.ndarray], eps: np.ndarray) -> np.ndarray:
        return _fico_score(eps[:, 0], eps[:, 1], eps[:, 2], eps[:, 3])

    return Node(
        FeatureSpec("credit_score", "continuous", "fico(independent draws)"),
        noise,
        fn,
    )


def _loan_model(correlated: bool) -> StructuralModel:
    ex = _loan_exogenous_nodes()
    nodes = [
        ex["age"],
        ex["sex"],
        ex["married"],
        _cosigner_dependent() if correlated else _cosigner_exogenous(),
        ex["credit_history"],
        ex["income"],
        ex["utilization"],
        ex["delinquencies"],
        ex["inquiries"],
        _score_dependent() if correlated else _score_exogenous(),
    ]
    return StructuralModel(nodes)


@functools.lru_cache(maxsize=None)
def _cached_effects(generator_id: str) -> MarginalEffects:
    gt = _GROUND_TRUTH_BUILDERS[generator_id]()
    return compute_marginal_effects(gt)


def _with_beta(gt: GroundTruth, generator_id: str | None = None) -> GroundTruth:
    if not gt.model.dependency_edges:
        gt.beta = dict(gt.coefficients)
        gt.beta_se = {k: 0.0 for k in gt.coefficients}
    elif generator_id is not None:
        eff = _cached_effects(generator_id)
        gt.beta = dict(eff.beta)
        gt.beta_se = dict(eff.se)
    else:
        eff = compute_marginal_effects(gt)
        gt.beta = dict(eff.beta)
        gt.beta_se = dict(eff.se)
    return gt


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _loan_gt(correlated: bool) -> GroundTruth:
    return GroundTruth(
        intercept=LOAN_INTERCEPT,
        coefficients=dict(LOAN_COEFFICIENTS),
        noise_sd=LABEL_NOISE_SD,
        model=_loan_model(correlated),
    )


def gen_loan_correlated(n_rows: int, seed: int) -> tuple[Dataset, GroundTruth]:
    """Loan-approval data with the score and cosigner dependency structure."""
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    gt = _with_beta(_loan_gt(correlated=True), "loan_correlated")
    return _assemble("loan_correlated", gt.model, gt, n_rows, seed)


def gen_loan_independent(n_rows: int, seed: int) -> tuple[Dataset, GroundTruth]:
    """Loan-approval data with mutually independent features."""
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    gt = _with_beta(_loan_gt(correlated=False))
    return _assemble("loan_independent", gt.model, gt, n_rows, seed)


MARKETING_INTERCEPT = 1.0
# The marketing labeler is not spelled out by the source material; these
# weights are fixed artifact constants with a deliberate importance ordering
# and one exactly-zero coefficient.
MARKETING_COEFFICIENTS = {
    "age": 0.0005,
    "sex": 0.0,
    "married": 0.2,
    "education=high_school": -0.5,
    "education=college": 0.5,
    "education=graduate": 1.0,
    "previous_purchase": 2.0,
    "website_visits": 1.5,
    "subscribed": 0.75,
    "offer_type=discount": 1.0,
    "offer_type=bogo": 0.5,
    "offer_type=free_shipping": 0.25,
    "offer_value": 2.5,
    "mode=email": 0.3,
    "mode=sms": -0.3,
    "mode=social_media": 0.1,
}

_OFFER_VALUE_SUBSCRIBED_SLOPE = 20.0


def _offer_value_dependent() -> Node:
    def fn(parents: dict[str, np.ndarray], eps: np.ndarray) -> np.ndarray:
        return 5.0 + _OFFER_VALUE_SUBSCRIBED_SLOPE * parents["subscribed"] + eps

    return Node(
        FeatureSpec(
            "offer_value", "continuous", "5 + 20*subscribed + uniform(0,25)",
            ("subscribed",),
        ),
        lambda rng, n: rng.uniform(0, 25, size=n),
        fn,
    )


def _marketing_model(independent: bool) -> StructuralModel:
    nodes = [
        _uniform("age", 18, 100),
        _bernoulli("sex", 0.5),
        _bernoulli("married", 0.5),
        _categorical("education", ("high_school", "college", "graduate")),
        _bernoulli("previous_purchase", 0.5),
        _int_uniform("website_visits", 0, 50),
        _bernoulli("subscribed", 0.5),
        _categorical("offer_type", ("discount", "bogo", "free_shipping")),
        _uniform("offer_value", 5, 50)
        if independent
        else _offer_value_dependent(),
        _categorical("mode", ("email", "sms", "social_media")),
    ]
    return StructuralModel(nodes)


def _marketing_gt(independent: bool) -> GroundTruth:
    return GroundTruth(
        intercept=MARKETING_INTERCEPT,
        coefficients=dict(MARKETING_COEFFICIENTS),
        noise_sd=LABEL_NOISE_SD,
        model=_marketing_model(independent),
    )


def gen_marketing(
    n_rows: int, seed: int, independent: bool = False
) -> tuple[Dataset, GroundTruth]:
    """Direct-marketing data; 10 logical features, 16 one-hot-expanded columns."""
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    if independent:
        gt = _with_beta(_marketing_gt(independent=True))
        gen_id = "marketing_independent"
    else:
        gt = _with_beta(_marketing_gt(independent=False), "marketing")
        gen_id = "marketing"
    return _assemble(gen_id, gt.model, gt, n_rows, seed, {"independent": independent})


def gen_random_linear(d: int, n_rows: int, seed: int) -> tuple[Dataset, GroundTruth]:
    """i.i.d. normal features with a random integer-coefficient boundary.

    Coefficients are drawn uniformly from {-10,...,10}^d with the all-zero
    vector redrawn; labels are noiseless.
    """
    if not 3 <= d <= 100:
        raise ValueError("d must be in [3, 100]")
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    rng = substream(seed, "coefficients")
    coef = rng.integers(-10, 11, size=d).astype(float)
    while not coef.any():
        coef = rng.integers(-10, 11, size=d).astype(float)
    sd = math.sqrt(5.0)
    nodes = [_normal(f"x{i + 1}", 0.0, sd) for i in range(d)]
    gt = GroundTruth(
        intercept=0.0,
        coefficients={f"x{i + 1}": coef[i] for i in range(d)},
        noise_sd=0.0,
        model=StructuralModel(nodes),
    )
    gt = _with_beta(gt)
    return _assemble("random_linear", gt.model, gt, n_rows, seed, {"d": d})


SCENARIO_KINDS = (
    "correlated-age-score",
    "observed-confounder",
    "unobserved-confounder",
    "instability-2d",
)

# Simplified six-feature weight set: the shared loan weights restricted to
# the features present in the scenario variants.
_SCENARIO_BASE_COEF = {
    "age": 0.0005,
    "sex": 0.0,
    "inquiries": -0.5,
    "cosigner": 0.25,
    "utilization": -1.0,
    "credit_score": 5.0,
}

_AGE_SCORE_SLOPE = 3.0
_AGE_SCORE_NOISE_SD = 20.0
_SOCIAL_INCOME_SLOPE = -15_000.0
_SOCIAL_INCOME_RESIDUAL_SD = 25_000.0
# Without the large score weight in the index, the shared intercept would
# approve ~98% of rows; a smaller one keeps the classes usable.
_OBSERVED_CONFOUNDER_INTERCEPT = 0.5
INSTABILITY_BAND = 0.4
INSTABILITY_FLIP_PROB = 0.5


def _scenario_exogenous() -> list[Node]:
    ex = _loan_exogenous_nodes()
    return [
        ex["age"],
        ex["sex"],
        ex["inquiries"],
        _cosigner_exogenous(),
        ex["utilization"],
    ]


def _score_of_age() -> Node:
    def fn(parents: dict[str, np.ndarray], eps: np.ndarray) -> np.ndarray:
        return 600.0 + _AGE_SCORE_SLOPE * parents["age"] + eps

    return Node(
        FeatureSpec(
            "credit_score", "continuous", "600 + 3*age + normal(0,20)", ("age",)
        ),
        lambda rng, n: rng.normal(0.0, _AGE_SCORE_NOISE_SD, size=n),
        fn,
    )


def _score_of_credit_behavior() -> Node:
    def fn(parents: dict[str, np.ndarray], eps) -> np.ndarray:
        return (
            650.0
            + (70.0 - 15.0 * parents["inquiries"])
            + (105.0 - 100.0 * parents["utilization"])
        )

    return Node(
        FeatureSpec(
            "credit_score",
            "continuous",
            "650 + (70-15*inquiries) + (105-100*utilization)",
            ("inquiries", "utilization"),
        ),
        None,
        fn,
    )


def _income_of_social_support() -> Node:
    def fn(parents: dict[str, np.ndarray], eps: np.ndarray) -> np.ndarray:
        return 40_000.0 + _SOCIAL_INCOME_SLOPE * parents["social_support"] + eps

    return Node(
        FeatureSpec(
            "income",
            "continuous",
            "40000 - 15000*social_support + normal(0,25000)",
            ("social_support",),
        ),
        lambda rng, n: rng.normal(0.0, _SOCIAL_INCOME_RESIDUAL_SD, size=n),
        fn,
    )


def gen_scenario(kind: str, n_rows: int, seed: int) -> tuple[Dataset, GroundTruth]:
    """Structural variants that each break one causal-inference condition."""
    if kind not in SCENARIO_KINDS:
        raise ValueError(f"unknown scenario kind {kind!r}; choose from {SCENARIO_KINDS}")
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")

    if kind == "correlated-age-score":
        nodes = _scenario_exogenous() + [_score_of_age()]
        gt = GroundTruth(
            intercept=LOAN_INTERCEPT,
            coefficients=dict(_SCENARIO_BASE_COEF),
            noise_sd=LABEL_NOISE_SD,
            model=StructuralModel(nodes),
        )
        gt = _with_beta(gt, "scenario:correlated-age-score")
        return _assemble("scenario_correlated_age_score", gt.model, gt, n_rows, seed)

    if kind == "observed-confounder":
        # The score column is present and driven by utilization and inquiries
        # but carries zero weight in the labeler.
        nodes = _scenario_exogenous() + [_score_of_credit_behavior()]
        coef = dict(_SCENARIO_BASE_COEF)
        coef["credit_score"] = 0.0
        gt = GroundTruth(
            intercept=_OBSERVED_CONFOUNDER_INTERCEPT,
            coefficients=coef,
            noise_sd=LABEL_NOISE_SD,
            model=StructuralModel(nodes),
        )
        gt = _with_beta(gt, "scenario:observed-confounder")
        return _assemble("scenario_observed_confounder", gt.model, gt, n_rows, seed)

    if kind == "unobserved-confounder":
        nodes = _scenario_exogenous() + [
            _score_exogenous(),
            _normal("social_support", 0.0, 1.0),
            _income_of_social_support(),
        ]
        coef = dict(_SCENARIO_BASE_COEF)
        coef["social_support"] = 0.0
        coef["income"] = 3.0
        gt = GroundTruth(
            intercept=LOAN_INTERCEPT,
            coefficients=coef,
            noise_sd=LABEL_NOISE_SD,
            model=StructuralModel(nodes),
            hidden_features=("social_support",),
        )
        gt = _with_beta(gt, "scenario:unobserved-confounder")
        return _assemble(
            "scenario_unobserved_confounder", gt.model, gt, n_rows, seed
        )

    # instability-2d: clean linear boundary, labels flipped at random inside
    # a band around it.
    nodes = [_normal("income", 0.0, 1.0), _normal("utilization", 0.0, 1.0)]
    gt = GroundTruth(
        intercept=0.0,
        coefficients={"income": 1.0, "utilization": -1.0},
        noise_sd=0.0,
        model=StructuralModel(nodes),
    )
    gt = _with_beta(gt)

    def flipper(clean_index: np.ndarray, y: np.ndarray, s: int) -> np.ndarray:
        rng = substream(s, "label", "flips")
        in_band = np.abs(clean_index) < INSTABILITY_BAND
        flip = in_band & (rng.uniform(size=len(y)) < INSTABILITY_FLIP_PROB)
        return np.where(flip, 1 - y, y).astype(np.int8)

    return _assemble(
        "scenario_instability_2d",
        gt.model,
        gt,
        n_rows,
        seed,
        {"band": INSTABILITY_BAND, "flip_prob": INSTABILITY_FLIP_PROB},
        label_flipper=flipper,
    )


_GROUND_TRUTH_BUILDERS: dict[str, Callable[[], GroundTruth]] = {
    "loan_correlated": lambda: _loan_gt(correlated=True),
    "marketing": lambda: _marketing_gt(independent=False),
    "scenario:correlated-age-score": lambda: GroundTruth(
        intercept=LOAN_INTERCEPT,
        coefficients=dict(_SCENARIO_BASE_COEF),
        noise_sd=LABEL_NOISE_SD,
        model=StructuralModel(_scenario_exogenous() + [_score_of_age()]),
    ),
    "scenario:observed-confounder": lambda: GroundTruth(
        intercept=_OBSERVED_CONFOUNDER_INTERCEPT,
        coefficients={**_SCENARIO_BASE_COEF, "credit_score": 0.0},
        noise_sd=LABEL_NOISE_SD,
        model=StructuralModel(_scenario_exogenous() + [_score_of_credit_behavior()]),
    ),
    "scenario:unobserved-confounder": lambda: GroundTruth(
        intercept=LOAN_INTERCEPT,
        coefficients={**_SCENARIO_BASE_COEF, "social_support": 0.0, "income": 3.0},
        noise_sd=LABEL_NOISE_SD,
        model=StructuralModel(
            _scenario_exogenous()
            + [_score_exogenous(), _normal("social_support", 0.0, 1.0),
               _income_of_social_support()]
        ),
        hidden_features=("social_support",),
    ),
}

def generate(generator: str, n_rows: int, seed: int, **params) -> tuple[Dataset, GroundTruth]:
    """Dispatch by generator id; used by the command-line runner."""
    if generator == "loan_correlated":
        return gen_loan_correlated(n_rows, seed)
    if generator == "loan_independent":
        return gen_loan_independent(n_rows, seed)
    if generator == "marketing":
        return gen_marketing(n_rows, seed, independent=bool(params.get("independent", False)))
    if generator == "random_linear":
        return gen_random_linear(int(params["d"]), n_rows, seed)
    if generator.startswith("scenario:"):
        return gen_scenario(generator.split(":", 1)[1], n_rows, seed)
    raise ValueError(f"unknown generator {generator!r}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def dataset_to_csv(ds: Dataset) -> str:
    """Standardized matrix plus label column; pair with the JSON manifest."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ds.feature_names + ["label"])
    for i in range(ds.X.shape[0]):
        writer.writerow(
            [format(v, ".17g") for v in ds.X[i]] + [int(ds.y[i])]
        )
    return buf.getvalue()


def save_dataset(ds: Dataset, csv_path, manifest_path) -> None:
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(dataset_to_csv(ds))
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(ds.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(csv_path, manifest_path) -> Dataset:
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    with open(csv_path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows)
    names = header[:-1]
    if names != manifest["feature_names"]:
        raise ValueError("CSV feature columns do not match the manifest")
    return Dataset(
        X=data[:, :-1],
        y=data[:, -1].astype(np.int8),
        feature_names=names,
        feature_means=np.array(manifest["means"]),
        feature_sds=np.array(manifest["sds"]),
        train_idx=np.array(manifest["train_idx"], dtype=int),
        test_idx=np.array(manifest["test_idx"], dtype=int),
        manifest=manifest,
    )
