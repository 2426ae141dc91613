import numpy as np
import pytest

from incident_fusion.errors import ConfigurationError, DimensionError, InsufficientDataError, SingularMatrixError
from incident_fusion.regressors import (
    KINDS,
    FeatureTable,
    RegressorConfig,
    default_configs,
    fit_gbdt,
    fit_knn,
    fit_ols,
    fit_rf,
    fit_svr,
    fit_tree,
    fit_xgb,
    leaf_weight,
    load_regressor,
    make_regressor,
    predict_knn,
    predict_tree,
    predict_tree_batch,
    save_regressor,
    svr_loss,
)
from incident_fusion.regressors.tree import find_best_split


def _table(rng, n=40, p=3):
    X = rng.normal(size=(n, p))
    y = 30 + 5 * X[:, 0] - 3 * X[:, 1] + rng.normal(scale=0.5, size=n)
    return FeatureTable(tuple(f"f{i}" for i in range(p)), X, y)


def _brute_force_gain(X, y):
    """Best SSE decrease over every feature and midpoint threshold."""
    sse = lambda v: float(((v - v.mean()) ** 2).sum()) if len(v) else 0.0
    best = 0.0
    for j in range(X.shape[1]):
        values = np.unique(X[:, j])
        for lo, hi in zip(values[:-1], values[1:]):
            mask = X[:, j] <= (lo + hi) / 2
            best = max(best, sse(y) - sse(y[mask]) - sse(y[~mask]))
    return best


def test_feature_table_checks():
    with pytest.raises(ValueError, match="positive"):
        FeatureTable(("x",), [[1.0]], [0.0])
    with pytest.raises(ValueError, match="NaN"):
        FeatureTable(("x",), [[np.nan]], [1.0])
    with pytest.raises(DimensionError):
        FeatureTable(("x", "y"), [[1.0]], [1.0])
    with pytest.raises(ConfigurationError, match="unique"):
        FeatureTable(("x", "x"), [[1.0, 2.0]], [1.0])


def test_feature_table_frame_round_trip():
    table = FeatureTable(("a", "b"), [[1.0, 2.0], [3.0, 4.0]], [10.0, 20.0], ("I-1", "I-2"))
    again = FeatureTable.from_frame(table.to_frame())
    assert again.feature_names == ("a", "b")
    assert again.row_ids == ("I-1", "I-2")
    np.testing.assert_array_equal(again.values, table.values)
    wider = table.with_columns(["Speed_v1"], [[0.5], [0.25]])
    assert wider.feature_names == ("a", "b", "Speed_v1")
    assert wider.values.shape == (2, 3)


def test_split_search_matches_brute_force():
    """Fifty random fixtures of at most 16 rows; tied feature values included."""
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(2, 17))
        X = rng.integers(0, 5, size=(n, 2)).astype(float)
        y = rng.uniform(1, 100, size=n)
        split = find_best_split(X, y, np.ones(n), 0.0, 1, np.arange(2))
        expected = _brute_force_gain(X, y)
        if split is None:
            assert expected < 1e-9
        else:
            assert 2 * split.gain == pytest.approx(expected, rel=1e-9, abs=1e-9)


def test_tree_examples():
    """Constant targets give one leaf; a clean split gives leaves 1 and 9."""
    const = FeatureTable(("x",), [[0.0], [1.0], [2.0]], [4.0, 4.0, 4.0])
    root = fit_tree(const, RegressorConfig("dt"))
    assert root.is_leaf and root.value == 4.0
    clean = FeatureTable(("x",), [[0.0], [0.0], [1.0], [1.0]], [1.0, 1.0, 9.0, 9.0])
    root = fit_tree(clean, RegressorConfig("dt", max_depth=1))
    assert (root.threshold, root.left.value, root.right.value) == (0.5, 1.0, 9.0)
    assert predict_tree(root, [0.2]) == 1.0
    assert predict_tree(root, [0.7]) == 9.0


def test_tree_respects_depth_and_leaf_size():
    table = _table(np.random.default_rng(1), n=80)
    root = fit_tree(table, RegressorConfig("dt", max_depth=3, min_samples_leaf=5))
    assert root.depth() <= 3
    X = table.values
    leaves = predict_tree_batch(root, X)
    _, counts = np.unique(leaves, return_counts=True)
    assert counts.min() >= 5


def test_empty_table_is_rejected():
    empty = FeatureTable(("x",), np.zeros((0, 1)), np.zeros(0))
    with pytest.raises(InsufficientDataError):
        fit_tree(empty, RegressorConfig("dt"))


def test_single_tree_forest_without_bagging_is_the_tree():
    table = _table(np.random.default_rng(2))
    cfg = RegressorConfig("rf", n_trees=1, bootstrap=False, max_features=None, max_depth=4)
    forest = fit_rf(table, cfg)
    tree = fit_tree(table, RegressorConfig("dt", max_depth=4))
    np.testing.assert_array_equal(forest.predict(table.values), predict_tree_batch(tree, table.values))


def test_forest_prediction_lies_within_members():
    table = _table(np.random.default_rng(3))
    forest = fit_rf(table, RegressorConfig("rf", n_trees=15, max_depth=3, max_features="sqrt", seed=9))
    members = forest.member_predictions(table.values)
    pred = forest.predict(table.values)
    assert np.all(pred >= members.min(axis=0) - 1e-12)
    assert np.all(pred <= members.max(axis=0) + 1e-12)


def test_forest_on_constant_targets():
    table = FeatureTable(("x",), np.arange(10.0)[:, None], np.full(10, 7.0))
    for seed in (0, 1, 2):
        forest = fit_rf(table, RegressorConfig("rf", n_trees=5, seed=seed))
        np.testing.assert_array_equal(forest.predict(table.values), np.full(10, 7.0))


def test_gbdt_hand_worked_stages():
    """Two stages at learning rate 0.5 on three rows."""
    table = FeatureTable(("x",), [[0.0], [1.0], [2.0]], [1.0, 2.0, 6.0])
    model = fit_gbdt(table, RegressorConfig("gbdt", n_trees=2, learning_rate=0.5, max_depth=1))
    stages = [s.tolist() for s in model.staged_predict(table.values)]
    assert stages == [[3.0, 3.0, 3.0], [2.25, 2.25, 4.5], [1.875, 1.875, 5.25]]


def test_gbdt_base_only_and_exact_fit():
    table = _table(np.random.default_rng(4), n=20)
    base = fit_gbdt(table, RegressorConfig("gbdt", n_trees=0))
    np.testing.assert_allclose(base.predict(table.values), table.target.mean())
    exact = fit_gbdt(table, RegressorConfig("gbdt", n_trees=1, learning_rate=1.0))
    np.testing.assert_allclose(exact.predict(table.values), table.target, atol=1e-9)


def test_gbdt_training_error_never_increases():
    table = _table(np.random.default_rng(5), n=60)
    model = fit_gbdt(table, RegressorConfig("gbdt", n_trees=20, max_depth=2, learning_rate=0.3))
    sse = [float(((table.target - p) ** 2).sum()) for p in model.staged_predict(table.values)]
    assert all(b <= a + 1e-9 for a, b in zip(sse, sse[1:]))


def test_xgb_leaf_weight_and_limits():
    assert leaf_weight(-4.0, 4.0, 1.0) == 0.8
    table = _table(np.random.default_rng(6), n=30)
    cfg = dict(n_trees=3, max_depth=2, learning_rate=0.5)
    xgb0 = fit_xgb(table, RegressorConfig("xgb", reg_lambda=0.0, **cfg))
    gbdt = fit_gbdt(table, RegressorConfig("gbdt", **cfg))
    np.testing.assert_allclose(xgb0.predict(table.values), gbdt.predict(table.values), rtol=1e-9)
    heavy = fit_xgb(table, RegressorConfig("xgb", reg_lambda=1e12, **cfg))
    np.testing.assert_allclose(heavy.predict(table.values), table.target.mean(), atol=1e-6)


def test_knn_examples():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(5, 2))
    table = FeatureTable(("a", "b"), X, [10.0, 20.0, 30.0, 40.0, 50.0])
    assert predict_knn(fit_knn(table, 1), X[3]) == 40.0
    np.testing.assert_allclose(fit_knn(table, 5).predict(X), 30.0)
    query = rng.normal(size=2)
    Z = (X - X.mean(axis=0)) / X.std(axis=0)
    q = (query - X.mean(axis=0)) / X.std(axis=0)
    nearest = np.argsort(((Z - q) ** 2).sum(axis=1), kind="stable")[:2]
    assert predict_knn(fit_knn(table, 2), query) == pytest.approx(table.target[nearest].mean())
    with pytest.raises(ConfigurationError):
        fit_knn(table, 6)


def test_knn_ties_keep_row_order():
    table = FeatureTable(("x",), [[1.0], [-1.0], [1.0]], [10.0, 20.0, 30.0])
    model = fit_knn(table, 2)
    assert model.neighbours([[1.0]]).tolist() == [[0, 2]]


def test_ols_examples():
    exact = FeatureTable(("x",), [[1.0], [2.0], [3.0], [4.0]], [3.0, 5.0, 7.0, 9.0])
    model = fit_ols(exact)
    assert model.coef[0] == pytest.approx(2.0, abs=1e-10)
    assert model.intercept == pytest.approx(1.0, abs=1e-10)
    const = fit_ols(FeatureTable(("x",), [[1.0], [2.0], [5.0]], [4.0, 4.0, 4.0]))
    assert const.coef[0] == pytest.approx(0.0, abs=1e-10)
    assert const.intercept == pytest.approx(4.0)


def test_ols_residuals_are_orthogonal():
    rng = np.random.default_rng(8)
    table = _table(rng, n=50)
    model = fit_ols(table)
    residual = table.target - model.predict(table.values)
    design = np.hstack([np.ones((50, 1)), table.values])
    assert np.linalg.norm(design.T @ residual) < 1e-8


def test_ols_names_the_dependent_column():
    X = np.array([[1.0, 2.0, 2.0], [2.0, 1.0, 1.0], [3.0, 5.0, 5.0], [4.0, 0.0, 0.0], [5.0, 3.0, 3.0]])
    table = FeatureTable(("a", "b", "b_copy"), X, [1.0, 2.0, 3.0, 4.0, 5.0])
    with pytest.raises(SingularMatrixError, match="b_copy"):
        fit_ols(table)
    with pytest.raises(InsufficientDataError):
        fit_ols(FeatureTable(("a", "b"), X[:2, :2], [1.0, 2.0]))


def test_svr_fits_a_line_inside_the_tube():
    x = np.linspace(0, 1, 21)
    table = FeatureTable(("x",), x[:, None], 2 * x + 1)
    model = fit_svr(table, RegressorConfig("svr", epsilon=0.5, C=100.0))
    residuals = table.target - model.predict(table.values)
    assert np.abs(residuals).max() <= 0.55


def test_svr_wide_tube_keeps_weights_at_zero():
    table = _table(np.random.default_rng(9))
    model = fit_svr(table, RegressorConfig("svr", epsilon=1e6))
    np.testing.assert_array_equal(model.coef, np.zeros(3))


def test_svr_loss_is_symmetric():
    np.testing.assert_array_equal(svr_loss(np.array([2.0, -2.0, 0.3]), 0.5), [1.5, 1.5, 0.0])


@pytest.mark.parametrize("kind", ["rf", "gbdt", "xgb", "svr"])
def test_seeded_models_are_deterministic(kind):
    table = _table(np.random.default_rng(10))
    cfg = default_configs(seed=3)[kind].with_params(n_trees=10)
    a = make_regressor(cfg).fit_table(table).predict(table.values)
    b = make_regressor(cfg).fit_table(table).predict(table.values)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kind", ["dt", "knn", "ols"])
def test_row_order_does_not_matter(kind):
    rng = np.random.default_rng(11)
    table = _table(rng)
    shuffled = table.subset(rng.permutation(table.n_rows))
    query = rng.normal(size=(5, 3))
    cfg = default_configs()[kind]
    a = make_regressor(cfg).fit_table(table).predict(query)
    b = make_regressor(cfg).fit_table(shuffled).predict(query)
    np.testing.assert_allclose(a, b, rtol=1e-9)


@pytest.mark.parametrize("kind", KINDS)
def test_saved_models_predict_the_same(kind, tmp_path):
    table = _table(np.random.default_rng(12), n=30)
    cfg = default_configs()[kind].with_params(n_trees=5)
    est = make_regressor(cfg).fit_table(table)
    path = tmp_path / f"{kind}.json"
    save_regressor(est, path)
    again = load_regressor(path)
    assert again.feature_names == table.feature_names
    np.testing.assert_allclose(again.predict(table.values), est.predict(table.values), rtol=1e-12)


def test_estimator_checks_width_and_fit_state():
    est = make_regressor(RegressorConfig("ols"))
    with pytest.raises(ConfigurationError, match="not fitted"):
        est.predict([[1.0]])
    est.fit([[1.0], [2.0], [3.0]], [3.0, 5.0, 7.0])
    with pytest.raises(DimensionError):
        est.predict([[1.0, 2.0]])
    with pytest.raises(TypeError, match="config must be a RegressorConfig"):
        make_regressor({"kind": "ols"})


def test_config_validation():
    with pytest.raises(ConfigurationError, match="kind"):
        RegressorConfig("lasso")
    with pytest.raises(ConfigurationError, match="learning_rate"):
        RegressorConfig("gbdt", learning_rate=0.0)
    with pytest.raises(ConfigurationError, match="unknown hyper-parameter"):
        RegressorConfig("dt").with_params(depth=3)
    assert set(default_configs()) == set(KINDS)
