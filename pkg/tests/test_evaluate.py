import numpy as np
import pytest
from scipy.special import ndtri

from test_model import constant_model
from wassmix import (
    DegenerateVarianceError,
    InvalidInputError,
    LevelGrid,
    QuantileFunction,
    functional_pdp,
    gmm_quantile,
    ice_curves,
    marginal_param_curve,
    prediction_loss,
)


def gaussian_qf(grid, mu, sd):
    return QuantileFunction(grid, mu + sd * ndtri(grid.levels))


class TestPredictionLoss:
    def test_perfect_predictions(self, default_grid):
        obs = [gaussian_qf(default_grid, m, 1.0) for m in (0.0, 1.0, 2.0)]
        report = prediction_loss(obs, obs)
        assert report.mean_loss == 0.0
        assert report.r_squared == 1.0

    def test_mean_prediction_scores_zero(self, default_grid):
        obs = [gaussian_qf(default_grid, m, s) for m, s in ((0, 1), (2, 0.5), (-1, 2))]
        q_bar = QuantileFunction(default_grid, np.mean([q.values for q in obs], axis=0))
        report = prediction_loss(obs, [q_bar] * 3)
        assert report.r_squared == pytest.approx(0.0, abs=1e-12)

    def test_swapped_pair_gives_minus_three(self, default_grid):
        # constant quantile gaps make the truncated grid sums cancel exactly
        a = gaussian_qf(default_grid, 0.0, 1.0)
        b = gaussian_qf(default_grid, 2.0, 1.0)
        report = prediction_loss([a, b], [b, a])
        assert report.r_squared == pytest.approx(-3.0, abs=1e-12)

    def test_degenerate_variance_raises_but_reports_loss(self, default_grid):
        q = gaussian_qf(default_grid, 0.0, 1.0)
        p = gaussian_qf(default_grid, 1.0, 1.0)
        with pytest.raises(DegenerateVarianceError) as info:
            prediction_loss([q, q], [p, p])
        assert info.value.mean_loss == pytest.approx(0.99, abs=1e-12)
        assert info.value.per_sample.shape == (2,)

    def test_permutation_equivariance(self, default_grid):
        rng = np.random.default_rng(401)
        obs = [gaussian_qf(default_grid, rng.normal(), rng.uniform(0.5, 2)) for _ in range(8)]
        pred = [gaussian_qf(default_grid, rng.normal(), rng.uniform(0.5, 2)) for _ in range(8)]
        r1 = prediction_loss(obs, pred)
        perm = rng.permutation(8)
        r2 = prediction_loss([obs[i] for i in perm], [pred[i] for i in perm])
        assert r1.mean_loss == pytest.approx(r2.mean_loss, rel=1e-15)
        assert r1.r_squared == pytest.approx(r2.r_squared, rel=1e-15)
        np.testing.assert_allclose(np.sort(r1.per_sample), np.sort(r2.per_sample))

    def test_r_squared_decreases_with_noise(self, default_grid):
        rng = np.random.default_rng(409)
        obs = [gaussian_qf(default_grid, rng.normal(), rng.uniform(0.5, 2)) for _ in range(20)]
        shifts = rng.standard_normal(20)
        scores = []
        for scale in (0.1, 1.0, 2.0):
            noisy = [
                QuantileFunction(default_grid, q.values + scale * e)
                for q, e in zip(obs, shifts)
            ]
            scores.append(prediction_loss(obs, noisy).r_squared)
        assert scores[0] > scores[1] > scores[2]

    def test_length_and_grid_validation(self, default_grid):
        q = gaussian_qf(default_grid, 0.0, 1.0)
        small = gaussian_qf(LevelGrid([0.5]), 0.0, 1.0)
        with pytest.raises(InvalidInputError):
            prediction_loss([q], [])
        with pytest.raises(InvalidInputError):
            prediction_loss([q], [small])


class TestCurves:
    def test_constant_model_gives_flat_pdp(self):
        model = constant_model()
        X = np.random.default_rng(419).normal(size=(10, 2))
        curve = functional_pdp(model, X, 0, np.linspace(-2, 2, 7), 0.5)
        assert np.ptp(curve.values) == 0.0
        expected = gmm_quantile(model.predict_params(np.zeros(2)), 0.5)
        np.testing.assert_allclose(curve.values, expected, atol=1e-10)

    def test_single_row_pdp_equals_ice(self):
        model = constant_model()
        X = np.array([[0.3, -0.7]])
        grid_vals = np.linspace(-1, 1, 5)
        curve = functional_pdp(model, X, 1, grid_vals, 0.3)
        ice = ice_curves(model, X, 1, grid_vals, 0.3)
        np.testing.assert_array_equal(curve.values, ice[0])

    def test_mean_of_ice_equals_pdp(self):
        model = constant_model()
        rng = np.random.default_rng(421)
        X = rng.normal(size=(6, 2))
        grid_vals = np.linspace(-1, 1, 4)
        ice = ice_curves(model, X, 0, grid_vals, 0.7)
        curve = functional_pdp(model, X, 0, grid_vals, 0.7)
        np.testing.assert_allclose(ice.mean(axis=0), curve.values, atol=1e-12)

    def test_ice_cell_matches_direct_prediction(self):
        model = constant_model()
        rng = np.random.default_rng(431)
        X = rng.normal(size=(3, 2))
        grid_vals = np.array([-0.5, 0.5])
        ice = ice_curves(model, X, 1, grid_vals, 0.25)
        x_mod = X[2].copy()
        x_mod[1] = grid_vals[0]
        direct = gmm_quantile(model.predict_params(x_mod), 0.25)
        assert ice[2, 0] == pytest.approx(direct, abs=1e-12)

    def test_single_value_grid_reduces_to_average(self):
        model = constant_model()
        X = np.random.default_rng(433).normal(size=(5, 2))
        curve = functional_pdp(model, X, 0, np.array([0.1]), 0.5)
        assert curve.values.shape == (1,)
        ice = ice_curves(model, X, 0, np.array([0.1]), 0.5)
        assert curve.values[0] == pytest.approx(ice.mean(), abs=1e-12)

    def test_marginal_param_curves_on_simplex(self):
        model = constant_model()
        X = np.random.default_rng(439).normal(size=(8, 2))
        curves = marginal_param_curve(model, X, 0, np.linspace(-1, 1, 6))
        np.testing.assert_allclose(curves.weights.sum(axis=1), 1.0, atol=1e-10)
        assert np.all((curves.weights >= 0.0) & (curves.weights <= 1.0))
        assert np.ptp(curves.means, axis=0).max() == 0.0

    def test_validation(self):
        model = constant_model()
        X = np.zeros((4, 2))
        with pytest.raises(InvalidInputError):
            functional_pdp(model, X, 5, np.array([0.0]), 0.5)
        with pytest.raises(InvalidInputError):
            functional_pdp(model, X, 0, np.array([0.0]), 1.5)
        with pytest.raises(InvalidInputError):
            functional_pdp(model, np.zeros((0, 2)), 0, np.array([0.0]), 0.5)
        with pytest.raises(InvalidInputError):
            functional_pdp(model, X, 0, np.array([1.0, 0.0]), 0.5)
