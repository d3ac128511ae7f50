import numpy as np
import pytest

from xalign import lime
from xalign.lime import (
    LimeConfig,
    SingularSystemError,
    default_bandwidth,
    explain,
    explain_averaged,
    fit_weighted_ridge,
    kernel_weights,
    sample_neighborhood,
    training_quartiles,
)


class TestSampling:
    def test_mean_concentrates_at_instance(self):
        xi = np.array([1.0, -2.0, 0.5])
        X = sample_neighborhood(xi, 4000, seed=1)
        assert np.abs(X.mean(axis=0) - xi).max() < 4.0 / np.sqrt(4000)

    def test_same_seed_identical(self):
        xi = np.zeros(4)
        assert np.array_equal(sample_neighborhood(xi, 50, 3),
                              sample_neighborhood(xi, 50, 3))

    def test_unit_variance(self):
        X = sample_neighborhood(np.zeros(3), 100_000, seed=2)
        assert np.abs(X.var(axis=0) - 1.0).max() < 0.1

    def test_needs_positive_count(self):
        with pytest.raises(ValueError):
            sample_neighborhood(np.zeros(2), 0, 1)


class TestKernel:
    def test_weight_one_at_instance(self):
        xi = np.array([1.0, 2.0])
        assert kernel_weights(xi, xi[None, :], nu=0.5)[0] == 1.0

    def test_exact_e_inverse(self):
        nu = 0.7
        xi = np.zeros(1)
        x = np.array([[np.sqrt(2.0) * nu]])  # squared distance = 2 nu^2
        assert kernel_weights(xi, x, nu)[0] == pytest.approx(np.exp(-1.0), abs=1e-15)

    def test_tiny_bandwidth_underflows_to_zero(self):
        xi = np.zeros(5)
        x = np.full((1, 5), 1.0)  # squared distance 5
        assert kernel_weights(xi, x, nu=1e-3)[0] == 0.0

    def test_bandwidth_validation(self):
        with pytest.raises(ValueError):
            kernel_weights(np.zeros(2), np.zeros((1, 2)), nu=0.0)

    def test_default_bandwidth(self):
        assert default_bandwidth(16) == 0.75 * 4.0


class TestWeightedRidge:
    def test_exact_least_squares_when_unpenalized(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(60, 4))
        beta = np.array([2.0, -1.0, 0.5, 3.0])
        u = fit_weighted_ridge(X, X @ beta, np.ones(60), lam=0.0)
        assert np.abs(u - beta).max() < 1e-9

    def test_shrinkage_limit(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 3))
        y = rng.normal(size=40)
        u = fit_weighted_ridge(X, y, np.ones(40), lam=1e12)
        assert np.abs(u).max() < 1e-8

    def test_matches_normal_equations_oracle(self):
        # Oracle: scalar-loop normal equations, assembled before the solve.
        rng = np.random.default_rng(2)
        X = rng.normal(size=(50, 3))
        y = rng.normal(size=50)
        w = rng.uniform(0.1, 1.0, size=50)
        lam = 0.7
        gram = np.zeros((3, 3))
        rhs = np.zeros(3)
        for n in range(50):
            for i in range(3):
                rhs[i] += X[n, i] * w[n] * y[n]
                for j in range(3):
                    gram[i, j] += X[n, i] * w[n] * X[n, j]
        for i in range(3):
            gram[i, i] += lam
        expect = np.linalg.solve(gram, rhs)
        got = fit_weighted_ridge(X, y, w, lam)
        assert np.abs(got - expect).max() < 1e-9

    def test_singular_unpenalized_system_raises(self):
        X = np.zeros((10, 2))
        X[:, 0] = 1.0
        X[:, 1] = 1.0  # perfectly collinear
        with pytest.raises(SingularSystemError):
            fit_weighted_ridge(X, np.ones(10), np.ones(10), lam=0.0)

    def test_negative_penalty_rejected(self):
        with pytest.raises(ValueError):
            fit_weighted_ridge(np.ones((2, 1)), np.ones(2), np.ones(2), lam=-1.0)


class TestExplain:
    def test_constant_model_gives_zero_coefficients(self):
        cfg = LimeConfig(n_samples=500, seed=4)
        e = explain(lambda X: np.full(X.shape[0], 0.37), np.zeros(3), cfg)
        assert np.abs(e.coefficients).max() < 1e-9
        assert e.intercept == pytest.approx(0.37, abs=1e-12)

    def test_linear_model_recovered_with_wide_kernel(self):
        beta = np.array([2.0, -1.0])
        xi = np.array([0.3, -0.7])
        errs = []
        for rep in range(10):
            cfg = LimeConfig(nu=1e4, n_samples=100_000, seed=100 + rep)
            e = explain(lambda X: X @ beta, xi, cfg)
            errs.append(np.abs(e.coefficients - beta).max())
        assert np.mean(errs) < 0.05

    def test_tiny_bandwidth_collapses_coefficients(self):
        # At five dimensions no neighborhood sample lands close enough to
        # keep a representable weight, so the pure-penalty path fires.
        beta = np.array([3.0, -2.0, 1.0, 4.0, -5.0])
        cfg = LimeConfig(nu=1e-3, n_samples=1000, seed=5)
        with pytest.warns(RuntimeWarning):
            e = explain(lambda X: X @ beta, np.zeros(5), cfg)
        assert np.abs(e.coefficients).max() <= 1e-6
        assert e.weights_underflowed

    def test_wide_kernel_matches_unweighted_ridge(self):
        beta = np.array([1.0, 2.0, -1.5])
        xi = np.array([0.5, 0.0, -0.5])
        cfg = LimeConfig(nu=1e8, n_samples=2000, seed=6)
        e = explain(lambda X: X @ beta, xi, cfg)
        samples = sample_neighborhood(xi, 2000, seed=6)
        y = samples @ beta
        xc = samples - samples.mean(axis=0)
        yc = y - y.mean()
        expect = fit_weighted_ridge(xc, yc, np.ones(2000), lam=cfg.ridge_lambda)
        assert np.abs(e.coefficients - expect).max() < 1e-6

    def test_ridge_adjustment_vanishes_with_sample_size(self):
        beta = np.array([4.0, -3.0])
        xi = np.array([0.2, 0.1])
        gaps = []
        for n in (1000, 10_000):
            pen = explain(lambda X: X @ beta, xi,
                          LimeConfig(nu=10.0, n_samples=n, ridge_lambda=1.0, seed=7))
            free = explain(lambda X: X @ beta, xi,
                           LimeConfig(nu=10.0, n_samples=n, ridge_lambda=0.0, seed=7))
            gaps.append(np.abs(pen.coefficients - free.coefficients).max())
        assert gaps[1] < gaps[0]

    def test_model_output_length_checked(self):
        cfg = LimeConfig(n_samples=100, seed=1)
        with pytest.raises(ValueError):
            explain(lambda X: np.ones(3), np.zeros(2), cfg)


class TestDiscretization:
    def test_quartile_cutpoints_shape(self):
        train = np.random.default_rng(0).normal(size=(400, 6))
        q = training_quartiles(train)
        assert q.shape == (3, 6)
        assert np.all(np.diff(q, axis=0) >= 0)

    def test_discretize_requires_quartiles(self):
        cfg = LimeConfig(discretize=True, n_samples=50, seed=1)
        with pytest.raises(ValueError):
            explain(lambda X: X[:, 0], np.zeros(2), cfg)

    def test_binarization_destroys_gradient_recovery(self):
        rng = np.random.default_rng(8)
        beta = np.array([6.0, -3.0, 9.0, 1.0, -7.0], dtype=float)
        xi = rng.standard_normal(5)
        train = rng.standard_normal((2000, 5))
        cfg = LimeConfig(nu=1e4, n_samples=20_000, seed=9, discretize=True,
                         quartiles=training_quartiles(train))
        e = explain(lambda X: X @ beta, xi, cfg)
        assert np.abs(e.coefficients - beta).max() > 0.05

    def test_same_bin_indicator(self):
        quartiles = np.array([[-1.0], [0.0], [1.0]])
        xi = np.array([0.5])  # bin 2
        samples = np.array([[-2.0], [-0.5], [0.2], [3.0]])
        design = lime._discretize(samples, xi, quartiles)
        assert design[:, 0].tolist() == [0.0, 0.0, 1.0, 0.0]


class TestSeedAveraging:
    def test_single_seed_is_identity(self):
        beta = np.array([1.0, -1.0])
        cfg = LimeConfig(n_samples=300, seed=11)
        single = explain(lambda X: X @ beta, np.zeros(2), cfg)
        avg = explain_averaged(lambda X: X @ beta, np.zeros(2), cfg, n_seeds=1)
        assert np.array_equal(single.coefficients, avg.coefficients)

    def test_equals_mean_of_members(self):
        beta = np.array([1.0, -1.0, 0.5])
        cfg = LimeConfig(n_samples=200, seed=3)
        model = lambda X: X @ beta
        avg = explain_averaged(model, np.zeros(3), cfg, n_seeds=4)
        members = [
            explain(model, np.zeros(3), LimeConfig(n_samples=200, seed=3 + i))
            for i in range(4)
        ]
        expect = np.mean([m.coefficients for m in members], axis=0)
        assert np.array_equal(avg.coefficients, expect)

    def test_variance_shrinks_with_seed_count(self):
        # Spread of 10-seed averages should be ~1/10 the single-run variance.
        beta = np.array([5.0, -5.0])
        xi = np.array([0.1, 0.2])
        model = lambda X: X @ beta
        singles = np.array([
            explain(model, xi, LimeConfig(nu=3.0, n_samples=150, seed=s)).coefficients
            for s in range(40)
        ])
        averaged = np.array([
            explain_averaged(model, xi, LimeConfig(nu=3.0, n_samples=150, seed=1000 + 10 * r),
                             n_seeds=10).coefficients
            for r in range(20)
        ])
        var_single = singles.var(axis=0).mean()
        var_avg = averaged.var(axis=0).mean()
        assert var_avg < var_single / 4.0

    def test_seed_count_validated(self):
        with pytest.raises(ValueError):
            explain_averaged(lambda X: X[:, 0], np.zeros(2), LimeConfig(), 0)


class TestConvergence:
    def test_error_non_increasing_in_sample_size(self):
        # Wide kernel, unit penalty: replicate-mean worst-coordinate error
        # must fall as the neighborhood grows (matched replicates across N).
        rng = np.random.default_rng(12)
        problems = []
        for _ in range(10):
            beta = rng.integers(-10, 11, size=5).astype(float)
            while not beta.any():
                beta = rng.integers(-10, 11, size=5).astype(float)
            problems.append((beta, rng.standard_normal(5)))
        means = []
        for n in (100, 1000, 10_000):
            errs = []
            for rep, (beta, xi) in enumerate(problems):
                cfg = LimeConfig(nu=1e4, n_samples=n, seed=500 + rep)
                e = explain(lambda X: X @ beta, xi, cfg)
                errs.append(np.abs(e.coefficients - beta).max())
            means.append(np.mean(errs))
        assert means[0] >= means[1] >= means[2]
