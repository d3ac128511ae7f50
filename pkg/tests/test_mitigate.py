import itertools

import numpy as np
import pytest

from xalign import datagen, lime, metrics, models
from xalign.mitigate import (
    EnsembleSpec,
    PipelineConfig,
    average_over_models,
    average_shap_lime,
    borda_aggregate,
    max_normalize,
    rank_ballot,
    recommended_pipeline,
)
from xalign.rng import derive_seed, substream


class TestBorda:
    def test_single_ballot_is_identity(self):
        ballot = np.array([2, 0, 1])
        assert borda_aggregate([ballot]).tolist() == [2, 0, 1]

    def test_three_ballot_tally(self):
        # candidates A=0, B=1, C=2; ballots A>B>C, A>C>B, B>A>C
        ballots = [np.array([0, 1, 2]), np.array([0, 2, 1]), np.array([1, 0, 2])]
        # totals: A = 3+3+2 = 8, B = 2+1+3 = 6, C = 1+2+1 = 4
        assert borda_aggregate(ballots).tolist() == [0, 1, 2]

    def test_full_permutation_set_ties_resolve_by_index(self):
        ballots = [np.array(p) for p in itertools.permutations(range(3))]
        assert borda_aggregate(ballots).tolist() == [0, 1, 2]

    def test_malformed_ballot_rejected(self):
        with pytest.raises(ValueError):
            borda_aggregate([np.array([0, 0, 2])])
        with pytest.raises(ValueError):
            borda_aggregate([])

    def test_rank_ballot_orders_by_magnitude(self):
        assert rank_ballot(np.array([0.1, -5.0, 2.0])).tolist() == [1, 2, 0]


class TestShapLimeMix:
    def test_identical_inputs_preserve_ranking(self):
        e = np.array([4.0, -2.0, 1.0])
        mixed = average_shap_lime(e, e)
        assert rank_ballot(mixed).tolist() == rank_ballot(e).tolist()

    def test_worked_example(self):
        mixed = average_shap_lime(np.array([2.0, 1.0]), np.array([4.0, 2.0]))
        assert mixed.tolist() == [1.0, 0.5]

    def test_zero_vector_contributes_zeros(self):
        mixed = average_shap_lime(np.zeros(3), np.array([2.0, 4.0, -4.0]))
        assert mixed.tolist() == [0.25, 0.5, -0.5]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            average_shap_lime(np.zeros(2), np.zeros(3))

    def test_max_normalize_passes_zero_through(self):
        assert max_normalize(np.zeros(4)).tolist() == [0.0] * 4


def _const_explainer(vec):
    vec = np.asarray(vec, dtype=float)
    return lambda model, xi: vec


def _dummy_model(d=3):
    return models.MlpModel(np.zeros((d, 2)), np.zeros(2), np.zeros(2), 0.0, 2, 0)


class TestModelAveraging:
    def test_single_model_single_explainer_identity(self):
        spec = EnsembleSpec([_dummy_model()], [_const_explainer([1.0, 2.0, 3.0])])
        out = average_over_models(spec, np.zeros(3))
        assert out.tolist() == [1.0, 2.0, 3.0]

    def test_opposite_explanations_cancel(self):
        e = np.array([1.0, -2.0, 0.5])
        spec = EnsembleSpec(
            [_dummy_model()], [_const_explainer(e), _const_explainer(-e)]
        )
        assert average_over_models(spec, np.zeros(3)).tolist() == [0.0, 0.0, 0.0]

    def test_order_invariance(self):
        vecs = [np.array([1.0, 2.0, -1.0]), np.array([0.5, -0.5, 2.0]),
                np.array([3.0, 0.0, 1.0])]
        fwd = EnsembleSpec([_dummy_model()], [_const_explainer(v) for v in vecs])
        rev = EnsembleSpec([_dummy_model()], [_const_explainer(v) for v in vecs[::-1]])
        assert np.array_equal(average_over_models(fwd, np.zeros(3)),
                              average_over_models(rev, np.zeros(3)))

    def test_positive_scaling_preserves_mean_ranking(self):
        rng = np.random.default_rng(0)
        vecs = [rng.normal(size=5) for _ in range(4)]
        spec = EnsembleSpec([_dummy_model(5)], [_const_explainer(v) for v in vecs])
        scaled = EnsembleSpec([_dummy_model(5)],
                              [_const_explainer(7.5 * v) for v in vecs])
        a = average_over_models(spec, np.zeros(5))
        b = average_over_models(scaled, np.zeros(5))
        assert np.array_equal(np.argsort(a), np.argsort(b))

    def test_borda_aggregation_mode(self):
        vecs = [np.array([3.0, 1.0, 2.0]), np.array([3.0, 2.0, 1.0])]
        spec = EnsembleSpec([_dummy_model()], [_const_explainer(v) for v in vecs],
                            aggregation="borda")
        out = average_over_models(spec, np.zeros(3))
        assert out[0] == 3.0  # feature 0 tops both ballots

    def test_feature_dimension_checked(self):
        spec = EnsembleSpec([_dummy_model(3), _dummy_model(4)],
                            [_const_explainer([1.0, 2.0, 3.0])])
        with pytest.raises(ValueError):
            average_over_models(spec, np.zeros(3))

    def test_empty_spec_rejected(self):
        with pytest.raises(ValueError):
            EnsembleSpec([], [_const_explainer([1.0])])

    def test_averaging_over_ten_networks_improves_concordance(self):
        # Paired comparison over ten well-trained networks: the grand mean of
        # the per-network surrogate coefficients should rank at least as well
        # as a single network's explanation on average.
        ds, gt = datagen.gen_loan_independent(3000, seed=3)
        beta = gt.beta_vector(ds.feature_names)
        nets = [models.train(ds, 30, seed=s, epochs=50) for s in range(1, 11)]
        for net in nets:
            assert models.auc(net.predict_proba(ds.test_X), ds.test_y) >= 0.9
        pick = np.sort(substream(99, "inst").choice(len(ds.test_idx), 30, replace=False))
        single, averaged = [], []
        for i, xi in enumerate(ds.test_X[pick]):
            per_model = [
                lime.explain(
                    net.predict_proba, xi,
                    lime.LimeConfig(seed=derive_seed(99, "lime", k, i)),
                ).coefficients
                for k, net in enumerate(nets)
            ]
            single.append(metrics.concordance(per_model[0], beta))
            averaged.append(metrics.concordance(np.mean(per_model, axis=0), beta))
        assert np.mean(averaged) >= np.mean(single)


@pytest.fixture(scope="module")
def small_setup():
    ds, gt = datagen.gen_loan_independent(1500, seed=9)
    cfg = PipelineConfig(
        hidden_grid=[4, 8], seed_grid=[1, 2], n_models=2,
        n_explainer_seeds=3, lime_nu=100.0, lime_n_samples=500,
        train_epochs=25, master_seed=17,
    )
    instances = ds.test_X[:5]
    return ds, gt, cfg, instances


class TestRecommendedPipeline:
    def test_full_scale_defaults(self):
        cfg = PipelineConfig()
        assert len(cfg.hidden_grid) * len(cfg.seed_grid) == 210
        # ten near-best models, ten explainer seeds each: 100 per instance
        assert cfg.n_models * cfg.n_explainer_seeds == 100
        assert cfg.lime_nu == 10_000.0
        assert cfg.lime_n_samples == 10_000
        assert cfg.epsilon_auc == 0.02

    def test_lime_track_counts_and_determinism(self, small_setup):
        ds, gt, cfg, instances = small_setup
        e1, mask1, man1 = recommended_pipeline(ds, "lime-track", cfg, instances)
        e2, mask2, man2 = recommended_pipeline(ds, "lime-track", cfg, instances)
        assert e1.shape == (5, ds.n_features)
        assert mask1 is None
        assert np.array_equal(e1, e2)
        assert man1["explainer"]["b_models"] * man1["explainer"]["e_explainers"] == 6
        assert len(man1["selected_models"]) == 2

    def test_shap_track_is_normalized_single_model(self, small_setup):
        ds, gt, cfg, instances = small_setup
        e, mask, man = recommended_pipeline(ds, "shap-track", cfg, instances)
        assert man["explainer"]["b_models"] == 1
        assert man["explainer"]["e_explainers"] == 1
        assert mask.shape == e.shape
        # reproduce the first instance by hand from the manifest's selection
        from xalign import shapley

        top = man["selected_models"][0]
        model = models.train(ds, top["hidden_nodes"], seed=top["seed"],
                             epochs=cfg.train_epochs)
        background = ds.train_X.mean(axis=0)
        scfg = shapley.ShapConfig(method="exact", background=background,
                                  seed=derive_seed(cfg.master_seed, "shap", 0))
        norm = shapley.normalize_shap(
            shapley.shap_exact(model.predict_proba, instances[0], scfg),
            instances[0], background,
        )
        got = e[0][~mask[0]]
        expect = norm.values[~norm.undefined]
        assert np.allclose(got, expect, atol=1e-12)

    def test_unknown_strategy_rejected(self, small_setup):
        ds, gt, cfg, instances = small_setup
        with pytest.raises(ValueError):
            recommended_pipeline(ds, "magic", cfg, instances)
