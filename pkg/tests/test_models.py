import numpy as np
import pytest

from oracles import auc_pairs
from xalign import datagen, models
from xalign.models import (
    MlpModel,
    PerformanceTarget,
    TrainingBandError,
    auc,
    complexity_sweep,
    loss_gradients,
    full_hidden_grid,
    predict_proba,
    train,
    train_to_target,
)


def _hand_model(w1, b1, w2, b2):
    w1 = np.asarray(w1, dtype=float)
    return MlpModel(w1, np.asarray(b1, dtype=float), np.asarray(w2, dtype=float),
                    float(b2), hidden_nodes=w1.shape[1], seed=0)


class TestAuc:
    def test_worked_example(self):
        assert auc(np.array([0.1, 0.4, 0.35, 0.8]), np.array([0, 0, 1, 1])) == 0.75

    def test_perfect_separation(self):
        assert auc(np.array([0.1, 0.2, 0.8, 0.9]), np.array([0, 0, 1, 1])) == 1.0

    def test_all_ties(self):
        assert auc(np.full(6, 0.3), np.array([0, 1, 0, 1, 0, 1])) == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            auc(np.array([0.1, 0.2]), np.array([1, 1]))

    def test_matches_all_pairs_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            n = int(rng.integers(10, 200))
            scores = np.round(rng.uniform(size=n), 2)  # induce ties
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                continue
            assert auc(scores, labels) == auc_pairs(scores.tolist(), labels.tolist())


class TestPredict:
    def test_zero_weight_model_outputs_half(self):
        m = _hand_model(np.zeros((3, 4)), np.zeros(4), np.zeros(4), 0.0)
        assert np.all(predict_proba(m, np.random.default_rng(0).normal(size=(5, 3))) == 0.5)

    def test_batch_equals_single_row(self):
        rng = np.random.default_rng(1)
        m = _hand_model(rng.normal(size=(4, 6)), rng.normal(size=6),
                        rng.normal(size=6), 0.3)
        X = rng.normal(size=(20, 4))
        batched = predict_proba(m, X)
        single = np.array([predict_proba(m, X[i])[0] for i in range(20)])
        assert np.abs(batched - single).max() < 1e-12

    def test_dimension_mismatch(self):
        m = _hand_model(np.zeros((3, 2)), np.zeros(2), np.zeros(2), 0.0)
        with pytest.raises(ValueError):
            predict_proba(m, np.zeros((4, 5)))

    def test_single_node_closed_form(self):
        # One hidden node: p = sigmoid(w2 * relu(w1 x + b1) + b2), monotone in
        # the pre-activation when w2 > 0.
        m = _hand_model([[1.5]], [0.25], [2.0], -0.5)
        xs = np.linspace(-3, 3, 41).reshape(-1, 1)
        pre = 1.5 * xs[:, 0] + 0.25
        expect = 1.0 / (1.0 + np.exp(-(2.0 * np.maximum(pre, 0.0) - 0.5)))
        got = predict_proba(m, xs)
        assert np.abs(got - expect).max() < 1e-12
        assert np.all(np.diff(got) >= 0)


class TestGradients:
    def test_backprop_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        m = _hand_model(rng.normal(size=(3, 4)) * 0.5, rng.normal(size=4) * 0.1,
                        rng.normal(size=4) * 0.5, 0.1)
        X = rng.normal(size=(12, 3))
        y = rng.integers(0, 2, size=12).astype(float)
        gw1, gb1, gw2, gb2 = loss_gradients(m, X, y)
        eps = 1e-6

        def loss():
            return models.logistic_loss(m, X, y)

        def check(arr, grad):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + eps
                up = loss()
                arr[idx] = orig - eps
                down = loss()
                arr[idx] = orig
                num = (up - down) / (2 * eps)
                denom = max(abs(num), abs(grad[idx]), 1e-8)
                assert abs(num - grad[idx]) / denom < 1e-5

        check(m.w1, gw1)
        check(m.b1, gb1)
        check(m.w2, gw2)
        b2 = m.b2
        m.b2 = b2 + eps
        up = loss()
        m.b2 = b2 - eps
        down = loss()
        m.b2 = b2
        num = (up - down) / (2 * eps)
        assert abs(num - gb2) / max(abs(num), 1e-8) < 1e-5


@pytest.fixture(scope="module")
def small_ds():
    return datagen.gen_loan_correlated(1200, seed=21)[0]


class TestTraining:
    def test_same_seed_identical_weights(self, small_ds):
        a = train(small_ds, 8, seed=3, epochs=5)
        b = train(small_ds, 8, seed=3, epochs=5)
        assert np.array_equal(a.w1, b.w1)
        assert np.array_equal(a.w2, b.w2)
        assert a.b2 == b.b2

    def test_loss_non_increasing_full_batch(self):
        # Linearly separable toy set, full-batch descent, small step.
        rng = np.random.default_rng(3)
        X = np.vstack([rng.normal(-2, 0.5, size=(40, 2)), rng.normal(2, 0.5, size=(40, 2))])
        y = np.array([0] * 40 + [1] * 40, dtype=np.int8)
        ds = datagen.Dataset(
            X=X, y=y, feature_names=["a", "b"],
            feature_means=np.zeros(2), feature_sds=np.ones(2),
            train_idx=np.arange(80), test_idx=np.array([], dtype=int),
            manifest={},
        )
        w1, b1, w2, b2 = models._init_weights(2, 4, seed=0)
        m = MlpModel(w1, b1, w2, b2, 4, 0)
        losses = [models.logistic_loss(m, X, y.astype(float))]
        for _ in range(60):
            gw1, gb1, gw2, gb2 = loss_gradients(m, X, y.astype(float))
            m.w1 -= 0.05 * gw1
            m.b1 -= 0.05 * gb1
            m.w2 -= 0.05 * gw2
            m.b2 -= 0.05 * gb2
            losses.append(models.logistic_loss(m, X, y.astype(float)))
        assert all(a >= b - 1e-12 for a, b in zip(losses, losses[1:]))

    def test_band_targeting_on_loan_data(self, loan_correlated, loan_model_093):
        ds, _ = loan_correlated
        test_auc = auc(predict_proba(loan_model_093, ds.test_X), ds.test_y)
        assert 0.91 <= test_auc <= 0.95

    def test_higher_band_reachable_on_independent_data(self, loan_independent):
        ds, _ = loan_independent
        m = train_to_target(ds, 100, PerformanceTarget(0.99, 0.01), seed=1)
        test_auc = auc(predict_proba(m, ds.test_X), ds.test_y)
        assert 0.98 <= test_auc <= 1.0

    def test_low_band_reachable(self, loan_correlated):
        ds, _ = loan_correlated
        m = train_to_target(ds, 100, PerformanceTarget(0.60, 0.05), seed=1)
        test_auc = auc(predict_proba(m, ds.test_X), ds.test_y)
        assert 0.55 <= test_auc <= 0.65

    def test_unreachable_band_raises_with_trajectory(self, small_ds):
        target = PerformanceTarget(0.999, 0.0005, max_epochs=2)
        with pytest.raises(TrainingBandError) as err:
            train_to_target(small_ds, 4, target, seed=1, lr=1e-5)
        assert len(err.value.trajectory) >= 1

    def test_calibration_preserves_auc(self, loan_correlated):
        ds, _ = loan_correlated
        raw = train_to_target(ds, 50, PerformanceTarget(0.93, 0.02), seed=5,
                              calibrate=False)
        cal = train_to_target(ds, 50, PerformanceTarget(0.93, 0.02), seed=5,
                              calibrate=True)
        a_raw = auc(predict_proba(raw, ds.test_X), ds.test_y)
        a_cal = auc(predict_proba(cal, ds.test_X), ds.test_y)
        assert a_raw == pytest.approx(a_cal, abs=1e-12)

    def test_training_requires_both_classes(self, small_ds):
        ds = small_ds
        broken = datagen.Dataset(
            X=ds.X, y=np.ones_like(ds.y), feature_names=ds.feature_names,
            feature_means=ds.feature_means, feature_sds=ds.feature_sds,
            train_idx=ds.train_idx, test_idx=ds.test_idx, manifest={},
        )
        with pytest.raises(ValueError):
            train(broken, 4, seed=0, epochs=1)


class TestComplexitySweep:
    def test_full_grid_size(self):
        grid = full_hidden_grid()
        assert len(grid) == 21
        assert grid[0] == 2 and grid[-1] == 100
        assert len(grid) * 10 == 210

    def test_selection_prefers_fewest_nodes(self, small_ds):
        entries = complexity_sweep(small_ds, [4, 16], [1, 2], epsilon_auc=1.0,
                                   epochs=8, top_k=4)
        assert len(entries) == 4
        assert entries[0].hidden_nodes <= entries[-1].hidden_nodes

    def test_epsilon_zero_keeps_only_argmax(self, small_ds):
        entries = complexity_sweep(small_ds, [4, 16], [1, 2], epsilon_auc=0.0,
                                   epochs=8, top_k=10)
        best = max(e.test_auc for e in entries)
        assert all(e.test_auc == best for e in entries)

    def test_tie_broken_by_lower_seed(self, small_ds):
        entries = complexity_sweep(small_ds, [4], [2, 1], epsilon_auc=1.0,
                                   epochs=3, top_k=4)
        same = [e for e in entries if e.hidden_nodes == 4]
        paired = sorted(same, key=lambda e: (-e.test_auc, e.seed))
        assert [e.seed for e in entries] == [e.seed for e in paired]

    def test_empty_grid_rejected(self, small_ds):
        with pytest.raises(ValueError):
            complexity_sweep(small_ds, [], [1], 0.02)


class TestSerialization:
    def test_round_trip(self, small_ds, tmp_path):
        m = train(small_ds, 6, seed=4, epochs=3)
        models.save_model(m, tmp_path / "w.npz", tmp_path / "meta.json")
        loaded = models.load_model(tmp_path / "w.npz", tmp_path / "meta.json")
        X = small_ds.test_X[:10]
        assert np.array_equal(predict_proba(m, X), predict_proba(loaded, X))
        assert loaded.hidden_nodes == 6
        assert loaded.seed == 4
