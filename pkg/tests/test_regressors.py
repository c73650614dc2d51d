import numpy as np
import numpy.testing as npt
import pytest

from hettrim import RegressorSpec, fit_regressor, register_regressor
from hettrim.regressors import BaggedTreesRegressor, KnnRegressor


def test_knn_two_point_average():
    # both training points are neighbours of the midpoint query
    model = fit_regressor(
        RegressorSpec(method="knn", knn_k=2), np.array([[0.0], [1.0]]),
        np.array([0.0, 2.0]),
    )
    npt.assert_allclose(model.predict(np.array([[0.5]])), [1.0])


def test_knn_k1_interpolates_training_points():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 2))
    y = rng.normal(size=30)
    model = fit_regressor(RegressorSpec(method="knn", knn_k=1), x, y)
    npt.assert_array_equal(model.predict(x), y)


def test_knn_k_equals_n_gives_global_mean():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = rng.integers(2, 40)
        x = rng.normal(size=(n, 3))
        y = rng.normal(size=n)
        q = rng.normal(size=(7, 3))
        model = fit_regressor(RegressorSpec(method="knn", knn_k=int(n)), x, y)
        npt.assert_array_equal(model.predict(q), np.full(7, y.mean()))


def test_knn_deterministic():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 2))
    y = rng.normal(size=50)
    q = rng.normal(size=(20, 2))
    spec = RegressorSpec(method="knn", knn_k=5)
    p1 = fit_regressor(spec, x, y).predict(q)
    p2 = fit_regressor(spec, x, y).predict(q)
    npt.assert_array_equal(p1, p2)


def test_knn_validation_errors():
    x = np.zeros((3, 2))
    y = np.zeros(3)
    with pytest.raises(ValueError, match="exceeds the training-set size"):
        fit_regressor(RegressorSpec(method="knn", knn_k=4), x, y)
    with pytest.raises(ValueError, match="empty training set"):
        fit_regressor(RegressorSpec(method="knn"), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError, match="shape"):
        fit_regressor(RegressorSpec(method="knn", knn_k=2), x, np.zeros(4))
    model = fit_regressor(RegressorSpec(method="knn", knn_k=2), x, y)
    with pytest.raises(ValueError, match="columns"):
        model.predict(np.zeros((2, 5)))


def test_knn_standardize_makes_columns_commensurable():
    # a column blown up by 1000 dominates unscaled distances but not
    # standardized ones
    rng = np.random.default_rng(3)
    x = rng.normal(size=(100, 2))
    y = x[:, 0] + 0.1 * rng.normal(size=100)
    q = rng.normal(size=(40, 2))
    scaled = x.copy()
    scaled[:, 1] *= 1000.0
    qs = q.copy()
    qs[:, 1] *= 1000.0
    spec = RegressorSpec(method="knn", knn_k=10, standardize=True)
    p_orig = fit_regressor(spec, x, y).predict(q)
    p_scaled = fit_regressor(spec, scaled, y).predict(qs)
    npt.assert_allclose(p_orig, p_scaled, rtol=1e-10)


def test_bagged_trees_constant_target():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(40, 2))
    y = np.full(40, 7.0)
    model = fit_regressor(RegressorSpec(method="bagged_trees", trees=25, seed=5), x, y)
    npt.assert_array_equal(model.predict(rng.normal(size=(10, 2))), np.full(10, 7.0))


def test_bagged_trees_learns_step_function():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, size=(400, 2))
    y = (x[:, 0] > 0).astype(float)
    model = fit_regressor(
        RegressorSpec(method="bagged_trees", trees=60, max_depth=6, seed=6), x, y
    )
    q = rng.uniform(-1, 1, size=(200, 2))
    far = np.abs(q[:, 0]) > 0.2  # away from the discontinuity
    err = np.abs(model.predict(q) - (q[:, 0] > 0)).astype(float)
    assert err[far].mean() < 0.1


def test_bagged_trees_deterministic_and_seed_sensitive():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(120, 3))
    y = x[:, 0] ** 2 + rng.normal(size=120)
    q = rng.normal(size=(30, 3))
    spec = RegressorSpec(method="bagged_trees", trees=20, seed=11)
    p1 = fit_regressor(spec, x, y).predict(q)
    p2 = fit_regressor(spec, x, y).predict(q)
    npt.assert_array_equal(p1, p2)
    other = fit_regressor(
        RegressorSpec(method="bagged_trees", trees=20, seed=12), x, y
    ).predict(q)
    assert not np.array_equal(p1, other)


def test_bagged_trees_mtry_validation():
    x = np.zeros((20, 2))
    y = np.zeros(20)
    with pytest.raises(ValueError, match="mtry"):
        BaggedTreesRegressor(
            RegressorSpec(method="bagged_trees", mtry=3, trees=2), x, y
        )


def test_registry_unknown_and_custom():
    with pytest.raises(ValueError, match="unknown regression method"):
        fit_regressor(RegressorSpec(method="kernel"), np.zeros((2, 1)), np.zeros(2))

    class MeanOnly:
        def __init__(self, spec, x, y):
            self._mean = float(np.mean(y))

        def predict(self, q):
            return np.full(np.asarray(q).shape[0], self._mean)

    register_regressor("mean_only", MeanOnly)
    model = fit_regressor(
        RegressorSpec(method="mean_only"), np.zeros((3, 1)), np.array([1.0, 2.0, 3.0])
    )
    npt.assert_allclose(model.predict(np.zeros((2, 1))), [2.0, 2.0])


def test_knn_is_a_knn_regressor_instance():
    model = fit_regressor(
        RegressorSpec(method="knn", knn_k=1), np.zeros((2, 1)), np.zeros(2)
    )
    assert isinstance(model, KnnRegressor)
