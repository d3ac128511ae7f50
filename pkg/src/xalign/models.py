"""Single-hidden-layer neural classifiers trained by plain gradient descent.

Models are deliberately simple and fully deterministic: rectifier hidden
layer, sigmoid output, mini-batch gradient descent with fixed learning rate
and optional momentum, weights initialized uniformly in
[-1/sqrt(fan_in), +1/sqrt(fan_in)] from the model seed.  Predictive quality
is steered by per-epoch AUC checkpoints rather than loss thresholds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .rng import substream

DEFAULT_LEARNING_RATE = 0.01
DEFAULT_MOMENTUM = 0.9
DEFAULT_BATCH_SIZE = 64
# Band-targeted training wants a gentle trajectory so per-epoch checkpoints
# land inside narrow AUC bands instead of jumping over them.
BAND_LEARNING_RATE = 1e-3
BAND_MOMENTUM = 0.0


class TrainingBandError(RuntimeError):
    """Target AUC band could not be reached; carries the AUC trajectory."""

    def __init__(self, message: str, trajectory: list[float]):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class PerformanceTarget:
    target_auc: float
    tolerance: float
    max_epochs: int = 400

    def __post_init__(self):
        if not 0.5 < self.target_auc <= 1.0:
            raise ValueError("target_auc must lie in (0.5, 1]")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.target_auc - self.tolerance <= 0.5:
            raise ValueError("band must stay above 0.5")


@dataclass
class MlpModel:
    w1: np.ndarray  # D x H
    b1: np.ndarray  # H
    w2: np.ndarray  # H
    b2: float
    hidden_nodes: int
    seed: int
    training_log: list[dict] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.w1.shape[0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return predict_proba(self, X)


def _init_weights(d: int, hidden: int, seed: int):
    rng = substream(seed, "init")
    lim1 = 1.0 / math.sqrt(d)
    lim2 = 1.0 / math.sqrt(hidden)
    w1 = rng.uniform(-lim1, lim1, size=(d, hidden))
    b1 = rng.uniform(-lim1, lim1, size=hidden)
    w2 = rng.uniform(-lim2, lim2, size=hidden)
    b2 = float(rng.uniform(-lim2, lim2))
    return w1, b1, w2, b2


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict_proba(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Probability of the positive class for each row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} feature columns, got {X.shape[1]}"
        )
    hidden = np.maximum(X @ model.w1 + model.b1, 0.0)
    return _sigmoid(hidden @ model.w2 + model.b2)


def logistic_loss(model: MlpModel, X: np.ndarray, y: np.ndarray) -> float:
    hidden = np.maximum(X @ model.w1 + model.b1, 0.0)
    z = hidden @ model.w2 + model.b2
    # log(1 + e^z) - y*z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def loss_gradients(model: MlpModel, X: np.ndarray, y: np.ndarray):
    """Mean logistic-loss gradients for (w1, b1, w2, b2) via backprop."""
    n = X.shape[0]
    pre = X @ model.w1 + model.b1
    hidden = np.maximum(pre, 0.0)
    z = hidden @ model.w2 + model.b2
    dz = (_sigmoid(z) - y) / n
    gw2 = hidden.T @ dz
    gb2 = float(np.sum(dz))
    dh = np.outer(dz, model.w2)
    dh[pre <= 0.0] = 0.0
    gw1 = X.T @ dh
    gb1 = dh.sum(axis=0)
    return gw1, gb1, gw2, gb2


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based AUC; tied scores contribute half a concordant pair."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    rank = 1
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (rank + rank + (j - i))
        rank += j - i + 1
        i = j + 1
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> float:
    return float(np.mean((np.asarray(scores) >= threshold) == (np.asarray(labels) == 1)))


def _run_epochs(
    model: MlpModel,
    ds: Dataset,
    epochs: int,
    lr: float,
    momentum: float,
    batch_size: int,
    shuffle_rng: np.random.Generator,
    checkpoint=None,
) -> MlpModel:
    X, y = ds.train_X, ds.train_y.astype(float)
    n = X.shape[0]
    vel = [np.zeros_like(model.w1), np.zeros_like(model.b1),
           np.zeros_like(model.w2), 0.0]
    for epoch in range(1, epochs + 1):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            grads = loss_gradients(model, X[idx], y[idx])
            vel[0] = momentum * vel[0] - lr * grads[0]
            vel[1] = momentum * vel[1] - lr * grads[1]
            vel[2] = momentum * vel[2] - lr * grads[2]
            vel[3] = momentum * vel[3] - lr * grads[3]
            model.w1 = model.w1 + vel[0]
            model.b1 = model.b1 + vel[1]
            model.w2 = model.w2 + vel[2]
            model.b2 = model.b2 + vel[3]
        if checkpoint is not None and checkpoint(model, epoch):
            break
    return model


def train(
    ds: Dataset,
    hidden_nodes: int,
    seed: int,
    epochs: int = 150,
    lr: float = DEFAULT_LEARNING_RATE,
    momentum: float = DEFAULT_MOMENTUM,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> MlpModel:
    """Train for a fixed number of epochs, logging AUC per epoch."""
    if not (set(np.unique(ds.train_y)) >= {0, 1}):
        raise ValueError("training split must contain both classes")
    w1, b1, w2, b2 = _init_weights(ds.n_features, hidden_nodes, seed)
    model = MlpModel(w1, b1, w2, b2, hidden_nodes, seed)
    shuffle_rng = substream(seed, "shuffle")

    def checkpoint(m: MlpModel, epoch: int) -> bool:
        m.training_log.append(
            {
                "epoch": epoch,
                "train_auc": auc(predict_proba(m, ds.train_X), ds.train_y),
                "test_auc": auc(predict_proba(m, ds.test_X), ds.test_y)
                if len(ds.test_idx) and ds.test_y.min() != ds.test_y.max()
                else float("nan"),
            }
        )
        return False

    return _run_epochs(model, ds, epochs, lr, momentum, batch_size, shuffle_rng, checkpoint)


def _calibrate_output(model: MlpModel, X: np.ndarray, y: np.ndarray) -> None:
    """Refit the output scale and bias on the training split (Newton steps).

    The transform z -> a*z + b with a > 0 is monotone, so ranking metrics
    (and hence the checkpoint AUC) are untouched; only the probability
    scale moves, which is what makes the fixed 0.5 threshold meaningful
    for a model stopped mid-descent.
    """
    hidden = np.maximum(X @ model.w1 + model.b1, 0.0)
    z = hidden @ model.w2 + model.b2
    a, b = 1.0, 0.0
    for _ in range(50):
        p = _sigmoid(a * z + b)
        r = p - y
        g = np.array([np.mean(r * z), np.mean(r)])
        w = p * (1.0 - p)
        h11 = np.mean(w * z * z)
        h12 = np.mean(w * z)
        h22 = np.mean(w)
        det = h11 * h22 - h12 * h12
        if det <= 1e-12:
            break
        da = (h22 * g[0] - h12 * g[1]) / det
        db = (h11 * g[1] - h12 * g[0]) / det
        a, b = a - da, b - db
        if abs(da) < 1e-10 and abs(db) < 1e-10:
            break
    if a > 0:
        model.w2 = model.w2 * a
        model.b2 = float(a * model.b2 + b)


def train_to_target(
    ds: Dataset,
    hidden_nodes: int,
    target: PerformanceTarget,
    seed: int,
    lr: float = BAND_LEARNING_RATE,
    momentum: float = BAND_MOMENTUM,
    batch_size: int = DEFAULT_BATCH_SIZE,
    calibrate: bool = True,
) -> MlpModel:
    """Stop at the first per-epoch checkpoint whose test AUC is in the band.

    If the trajectory jumps over the band between checkpoints, the best
    checkpoint at or below the target is returned instead.  If the band is
    never reached within ``max_epochs``, raises TrainingBandError with the
    achieved trajectory attached.  By default the output layer is then
    recalibrated on the training split (AUC-preserving; see
    ``_calibrate_output``).
    """
    if not (set(np.unique(ds.train_y)) >= {0, 1}):
        raise ValueError("training split must contain both classes")
    lo = target.target_auc - target.tolerance
    hi = target.target_auc + target.tolerance
    w1, b1, w2, b2 = _init_weights(ds.n_features, hidden_nodes, seed)
    model = MlpModel(w1, b1, w2, b2, hidden_nodes, seed)
    shuffle_rng = substream(seed, "shuffle")
    trajectory: list[float] = []
    best_below: dict | None = None
    state = {"in_band": False, "overshot": False}

    def checkpoint(m: MlpModel, epoch: int) -> bool:
        nonlocal best_below
        test_auc = auc(predict_proba(m, ds.test_X), ds.test_y)
        trajectory.append(test_auc)
        m.training_log.append({"epoch": epoch, "test_auc": test_auc})
        if lo <= test_auc <= hi:
            state["in_band"] = True
            return True
        if test_auc <= target.target_auc and (
            best_below is None or test_auc > best_below["auc"]
        ):
            best_below = {
                "auc": test_auc,
                "weights": (m.w1.copy(), m.b1.copy(), m.w2.copy(), m.b2),
                "epoch": epoch,
            }
        if test_auc > hi:
            state["overshot"] = True
            return True
        return False

    # Epoch-0 checkpoint so an immediate overshoot still has a fallback.
    if not checkpoint(model, 0):
        _run_epochs(
            model, ds, target.max_epochs, lr, momentum, batch_size, shuffle_rng,
            checkpoint,
        )
    if state["overshot"] and not state["in_band"]:
        if best_below is None:
            raise TrainingBandError(
                f"band [{lo:.4g}, {hi:.4g}] was overshot with no checkpoint "
                "at or below the target",
                trajectory,
            )
        model.w1, model.b1, model.w2, model.b2 = best_below["weights"]
        model.training_log.append(
            {"epoch": best_below["epoch"], "test_auc": best_below["auc"],
             "note": "band overshot; best checkpoint at or below target"}
        )
    elif not state["in_band"]:
        raise TrainingBandError(
            f"test AUC never entered [{lo:.4g}, {hi:.4g}] within "
            f"{target.max_epochs} epochs",
            trajectory,
        )
    if calibrate:
        _calibrate_output(model, ds.train_X, ds.train_y.astype(float))
    return model


@dataclass
class SweepEntry:
    hidden_nodes: int
    seed: int
    test_auc: float
    model: MlpModel


def complexity_sweep(
    ds: Dataset,
    hidden_grid: list[int],
    seed_grid: list[int],
    epsilon_auc: float,
    epochs: int = 150,
    top_k: int = 10,
    lr: float = DEFAULT_LEARNING_RATE,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> list[SweepEntry]:
    """Train the full grid and keep the simplest near-best models.

    Among models whose test AUC is within ``epsilon_auc`` of the grid's best,
    returns up to ``top_k`` entries ordered by fewest hidden nodes, then
    higher AUC, then lower seed.
    """
    if not hidden_grid or not seed_grid:
        raise ValueError("hidden_grid and seed_grid must be non-empty")
    entries: list[SweepEntry] = []
    for h in hidden_grid:
        for s in seed_grid:
            m = train(ds, h, seed=s, epochs=epochs, lr=lr, batch_size=batch_size)
            entries.append(
                SweepEntry(h, s, auc(predict_proba(m, ds.test_X), ds.test_y), m)
            )
    best = max(e.test_auc for e in entries)
    eligible = [e for e in entries if e.test_auc >= best - epsilon_auc]
    eligible.sort(key=lambda e: (e.hidden_nodes, -e.test_auc, e.seed))
    return eligible[:top_k]


def full_hidden_grid() -> list[int]:
    """21 hidden-layer sizes spanning 2..100 (2 plus multiples of 5)."""
    return [2] + list(range(5, 101, 5))


def save_model(model: MlpModel, weights_path, meta_path) -> None:
    np.savez(
        weights_path, w1=model.w1, b1=model.b1, w2=model.w2,
        b2=np.array([model.b2]),
    )
    meta = {
        "hidden_nodes": model.hidden_nodes,
        "seed": model.seed,
        "n_features": model.n_features,
        "activation": "rectifier",
        "threshold": 0.5,  # classification cut for accuracy reporting
        "training_log": model.training_log,
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(weights_path, meta_path) -> MlpModel:
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    data = np.load(Path(weights_path))
    return MlpModel(
        w1=data["w1"],
        b1=data["b1"],
        w2=data["w2"],
        b2=float(data["b2"][0]),
        hidden_nodes=int(meta["hidden_nodes"]),
        seed=int(meta["seed"]),
        training_log=list(meta.get("training_log", [])),
    )
