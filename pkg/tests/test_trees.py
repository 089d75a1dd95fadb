import numpy as np
import pytest

from wassmix import (
    InvalidInputError,
    RegressionTree,
    TreeEnsemble,
    TreeParams,
    ensemble_predict,
    fit_tree,
    predict_tree,
)


def exhaustive_best_single_split_mse(X, y, min_leaf):
    """Oracle: enumerate every (feature, midpoint) split, return best MSE."""
    n = X.shape[0]
    best = np.var(y)
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = (lo + hi) / 2
            left = X[:, f] <= thr
            nl = left.sum()
            if nl < min_leaf or n - nl < min_leaf:
                continue
            sse = ((y[left] - y[left].mean()) ** 2).sum() + ((y[~left] - y[~left].mean()) ** 2).sum()
            best = min(best, sse / n)
    return best


def training_mse(tree, X, y):
    return float(np.mean((tree.predict(X) - y) ** 2))


class TestFitTree:
    def test_constant_targets_single_leaf(self):
        X = np.arange(20, dtype=float).reshape(-1, 1)
        tree = fit_tree(X, np.full(20, 3.25), TreeParams(min_samples_leaf=2))
        assert tree.n_nodes == 1
        assert predict_tree(tree, np.array([4.0])) == 3.25

    def test_step_function_split(self):
        X = np.arange(10, dtype=float).reshape(-1, 1)
        y = (X[:, 0] >= 5).astype(float)
        tree = fit_tree(X, y, TreeParams(max_depth=1, min_samples_leaf=1))
        assert tree.feature[0] == 0
        assert 4.0 < tree.threshold[0] < 5.0
        assert predict_tree(tree, np.array([3.0])) == 0.0
        assert predict_tree(tree, np.array([7.0])) == 1.0

    def test_beats_exhaustive_single_split(self):
        rng = np.random.default_rng(211)
        X = rng.normal(size=(50, 3))
        y = rng.normal(size=50) + X[:, 0] * 2
        params = TreeParams(max_depth=2, min_samples_leaf=5)
        tree = fit_tree(X, y, params)
        oracle = exhaustive_best_single_split_mse(X, y, 5)
        assert training_mse(tree, X, y) <= oracle + 1e-12

    def test_depth_one_matches_exhaustive_single_split(self):
        rng = np.random.default_rng(223)
        for _ in range(10):
            X = rng.normal(size=(40, 2))
            y = rng.normal(size=40)
            params = TreeParams(max_depth=1, min_samples_leaf=4)
            tree = fit_tree(X, y, params)
            oracle = exhaustive_best_single_split_mse(X, y, 4)
            assert training_mse(tree, X, y) == pytest.approx(oracle, abs=1e-12)

    def test_routing_matches_fit_time_assignment(self):
        rng = np.random.default_rng(227)
        X = rng.normal(size=(60, 3))
        y = rng.normal(size=60)
        tree = fit_tree(X, y, TreeParams(max_depth=3, min_samples_leaf=5))
        for i in range(60):
            assert predict_tree(tree, X[i]) == tree.value[tree.train_leaf_id[i]]

    def test_mse_non_increasing_in_depth(self):
        rng = np.random.default_rng(229)
        for _ in range(5):
            X = rng.normal(size=(80, 3))
            y = X[:, 0] ** 2 + rng.normal(size=80)
            mses = [
                training_mse(fit_tree(X, y, TreeParams(max_depth=d, min_samples_leaf=4)), X, y)
                for d in (1, 2, 3, 4)
            ]
            assert np.all(np.diff(mses) <= 1e-12)

    def test_piecewise_constant_between_thresholds(self):
        rng = np.random.default_rng(233)
        X = rng.normal(size=(50, 2))
        y = rng.normal(size=50)
        tree = fit_tree(X, y, TreeParams(max_depth=3, min_samples_leaf=5))
        thresholds = tree.threshold[tree.feature >= 0]
        x = rng.normal(size=2)
        for f in range(2):
            gaps = np.abs(thresholds - x[f])
            gaps = gaps[gaps > 0]
            delta = 0.4 * gaps.min() if gaps.size else 0.1
            for sign in (-1, 1):
                x2 = x.copy()
                x2[f] += sign * delta
                assert predict_tree(tree, x2) == predict_tree(tree, x)

    def test_determinism_bit_identical(self):
        rng = np.random.default_rng(239)
        X = rng.normal(size=(70, 3))
        y = rng.normal(size=70)
        t1 = fit_tree(X, y, TreeParams())
        t2 = fit_tree(X, y, TreeParams())
        np.testing.assert_array_equal(t1.feature, t2.feature)
        np.testing.assert_array_equal(t1.threshold, t2.threshold)
        np.testing.assert_array_equal(t1.value, t2.value)
        assert t1.to_dict() == t2.to_dict()

    def test_too_few_rows_rejected(self):
        X = np.zeros((5, 1))
        with pytest.raises(InvalidInputError):
            fit_tree(X, np.zeros(5), TreeParams(min_samples_leaf=3))

    def test_min_leaf_respected(self):
        rng = np.random.default_rng(241)
        X = rng.normal(size=(30, 1))
        y = rng.normal(size=30)
        tree = fit_tree(X, y, TreeParams(max_depth=4, min_samples_leaf=10))
        leaf_sizes = np.bincount(tree.train_leaf_id, minlength=tree.n_nodes)
        assert np.all(leaf_sizes[tree.feature < 0] >= 10)

    def test_params_validation(self):
        with pytest.raises(InvalidInputError):
            TreeParams(max_depth=0)
        with pytest.raises(InvalidInputError):
            TreeParams(min_samples_leaf=0)
        with pytest.raises(InvalidInputError):
            TreeParams(min_split_improvement=-0.5)


class TestPredictTree:
    def test_single_leaf_constant(self):
        X = np.zeros((4, 2))
        tree = fit_tree(X, np.full(4, 7.0), TreeParams(min_samples_leaf=1))
        rng = np.random.default_rng(251)
        for _ in range(5):
            assert predict_tree(tree, rng.normal(size=2)) == 7.0

    def test_dimension_mismatch(self):
        X = np.arange(10, dtype=float).reshape(-1, 1)
        tree = fit_tree(X, X[:, 0], TreeParams(min_samples_leaf=1))
        with pytest.raises(InvalidInputError):
            predict_tree(tree, np.array([1.0, 2.0]))
        with pytest.raises(InvalidInputError):
            tree.predict(np.zeros((3, 4)))

    def test_dict_round_trip(self):
        rng = np.random.default_rng(257)
        X = rng.normal(size=(40, 3))
        y = rng.normal(size=40)
        tree = fit_tree(X, y, TreeParams(max_depth=3, min_samples_leaf=4))
        clone = RegressionTree.from_dict(tree.to_dict(), 3)
        np.testing.assert_array_equal(clone.predict(X), tree.predict(X))


class TestTreeEnsemble:
    def test_empty_ensemble_returns_base(self):
        ens = TreeEnsemble(base_value=2.5, learning_rate=0.1)
        assert ensemble_predict(ens, np.array([0.0, 1.0])) == 2.5

    def test_single_tree_unit_rate(self):
        rng = np.random.default_rng(263)
        X = rng.normal(size=(30, 2))
        y = rng.normal(size=30)
        tree = fit_tree(X, y, TreeParams(min_samples_leaf=3))
        ens = TreeEnsemble(base_value=0.0, learning_rate=1.0)
        ens.append(tree)
        for i in range(5):
            assert ensemble_predict(ens, X[i]) == predict_tree(tree, X[i])

    def test_append_adds_scaled_prediction(self):
        rng = np.random.default_rng(269)
        X = rng.normal(size=(30, 2))
        ens = TreeEnsemble(base_value=1.0, learning_rate=0.25)
        ens.append(fit_tree(X, rng.normal(size=30), TreeParams(min_samples_leaf=3)))
        x = X[4]
        before = ensemble_predict(ens, x)
        new_tree = fit_tree(X, rng.normal(size=30), TreeParams(min_samples_leaf=3))
        ens.append(new_tree)
        after = ensemble_predict(ens, x)
        assert after - before == pytest.approx(0.25 * predict_tree(new_tree, x), abs=1e-15)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(271)
        X = rng.normal(size=(25, 2))
        ens = TreeEnsemble(base_value=0.5, learning_rate=0.1)
        for _ in range(3):
            ens.append(fit_tree(X, rng.normal(size=25), TreeParams(min_samples_leaf=3)))
        batch = ens.predict(X)
        for i in range(25):
            assert batch[i] == pytest.approx(ens.predict_one(X[i]), abs=1e-12)
