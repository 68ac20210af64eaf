"""
Tests for the linear, random forest, boosting and neural network baselines
"""
import numpy as np
import pytest

from modules.baselines import (
    LinearModel,
    dnn_forward,
    dnn_gradients,
    fit_dnn,
    fit_gbt,
    fit_linear,
    fit_random_forest,
    init_dnn,
    load_baseline,
    predict_baseline,
    save_baseline,
    split_counts,
    write_feature_importance,
)
from modules.config import BoostingConfig, DnnConfig, ForestConfig
from modules.errors import ConfigError, DataError, NumericError, ShapeError
from modules.evaluation import r2
from modules.optim import finite_difference_gradient, relative_error


def line(n=10):
    x = np.arange(n, dtype=float)[:, None]
    return x, 2 * x.ravel() + 1


def test_linear_recovers_exact_line():
    x, y = line()
    model = fit_linear(x, y)
    assert model.weights[0] == pytest.approx(2.0, abs=1e-8)
    assert model.bias == pytest.approx(1.0, abs=1e-8)
    exact = fit_linear(x, y, ridge_lambda=0.0)
    assert exact.weights[0] == pytest.approx(2.0, abs=1e-12)


def test_linear_constant_target():
    x = np.random.default_rng(0).standard_normal((30, 3))
    model = fit_linear(x, np.full(30, 4.0))
    np.testing.assert_allclose(model.weights, 0.0, atol=1e-12)
    assert model.bias == pytest.approx(4.0)


def test_linear_duplicate_column_needs_ridge():
    x, y = line()
    doubled = np.hstack([x, x])
    model = fit_linear(doubled, y)
    np.testing.assert_allclose(predict_baseline(model, doubled), y, atol=1e-6)
    with pytest.raises(NumericError):
        fit_linear(doubled, y, ridge_lambda=0.0)


def test_linear_input_checks():
    with pytest.raises(ShapeError):
        fit_linear(np.ones((3, 2)), np.ones(4))
    with pytest.raises(DataError):
        fit_linear(np.ones((0, 2)), np.ones(0))


def test_linear_log_target_round_trips_through_expm1():
    x = np.linspace(0, 2, 15)[:, None]
    y = np.expm1(2 * x.ravel())
    model = fit_linear(x, y, log_target=True)
    np.testing.assert_allclose(predict_baseline(model, x), y, rtol=1e-6, atol=1e-7)


def test_predictions_are_clamped_and_dimension_checked():
    model = LinearModel(np.array([1.0]), -10.0, 1)
    assert predict_baseline(model, np.array([[2.0], [15.0]])).tolist() == [0.0, 5.0]
    with pytest.raises(ShapeError):
        predict_baseline(model, np.ones((2, 3)))


def test_forest_depth_limit_and_constant_target(rng):
    x = rng.random((80, 4))
    forest = fit_random_forest(x, rng.random(80), ForestConfig(n_estimators=20, max_depth=2), seed=0)
    assert len(forest.trees) == 20
    assert all(tree.tree_.max_depth <= 2 for tree in forest.trees)
    flat = fit_random_forest(x, np.full(80, 3.0), ForestConfig(n_estimators=5), seed=0)
    np.testing.assert_allclose(predict_baseline(flat, x), 3.0)


def test_forest_fits_a_step(rng):
    x = rng.random((200, 1))
    y = (x.ravel() > 0.5).astype(float)
    held_out = rng.random((200, 1))
    forest = fit_random_forest(x, y, ForestConfig(n_estimators=500, max_depth=2), seed=1)
    expected = (held_out.ravel() > 0.5).astype(float)
    assert np.mean((predict_baseline(forest, held_out) - expected) ** 2) < 0.05


def test_tree_nodes_respect_min_samples_split(rng):
    x = rng.random((150, 3))
    y = np.sin(5 * x[:, 0]) + x[:, 2]
    forest = fit_random_forest(x, y, ForestConfig(n_estimators=20, max_depth=6, min_samples_split=10), seed=3)
    boosted = fit_gbt(x, y, BoostingConfig(learning_rate=0.1, n_estimators=20, max_depth=6, min_samples_split=10), seed=3)
    for tree in forest.trees + boosted.trees:
        internal = tree.tree_.children_left != -1
        assert internal.any()
        assert tree.tree_.n_node_samples[internal].min() >= 10


def test_boosting_with_tiny_learning_rate_predicts_the_mean(rng):
    x = rng.random((60, 2))
    y = 1 + 4 * rng.random(60)
    model = fit_gbt(x, y, BoostingConfig(learning_rate=1e-9, n_estimators=10, max_depth=3), seed=0)
    np.testing.assert_allclose(predict_baseline(model, x), np.mean(y), rtol=0, atol=1e-6)


@pytest.mark.parametrize("kind", ["LR", "RF", "GBT", "DNN"])
def test_predictions_follow_row_permutations(kind, rng):
    x = rng.random((50, 4))
    y = 3 * x[:, 0] + x[:, 1] ** 2 + 1
    model = {
        "LR": lambda: fit_linear(x, y),
        "RF": lambda: fit_random_forest(x, y, ForestConfig(n_estimators=10, max_depth=3), seed=0),
        "GBT": lambda: fit_gbt(x, y, BoostingConfig(learning_rate=0.3, n_estimators=10, max_depth=3), seed=0),
        "DNN": lambda: fit_dnn(x, y, DnnConfig(hidden=8, epochs=3, batch_size=16, learning_rate=0.01), seed=0),
    }[kind]()
    order = rng.permutation(50)
    np.testing.assert_allclose(predict_baseline(model, x[order]), predict_baseline(model, x)[order], rtol=1e-12, atol=1e-12)


def test_forest_is_deterministic_and_thread_count_free(rng):
    x = rng.random((60, 5))
    y = x @ np.arange(5.0)
    serial = fit_random_forest(x, y, ForestConfig(n_estimators=12), seed=9)
    threaded = fit_random_forest(x, y, ForestConfig(n_estimators=12, n_jobs=4), seed=9)
    assert np.array_equal(predict_baseline(serial, x), predict_baseline(threaded, x))


def test_boosting_single_full_step_interpolates(rng):
    x = rng.random((20, 1))
    y = rng.random(20) * 10
    model = fit_gbt(x, y, BoostingConfig(learning_rate=1.0, n_estimators=1, max_depth=30), seed=0)
    np.testing.assert_allclose(model.raw_predict(x), y, atol=1e-12)
    assert model.stage_mse[1] == pytest.approx(0.0, abs=1e-20)


def test_boosting_training_error_never_increases(rng):
    x = rng.random((100, 3))
    y = np.sin(6 * x[:, 0]) + x[:, 1]
    model = fit_gbt(x, y, BoostingConfig(learning_rate=0.1, n_estimators=40, max_depth=3), seed=2)
    assert len(model.stage_mse) == 41
    assert all(b <= a + 1e-12 for a, b in zip(model.stage_mse, model.stage_mse[1:]))
    np.testing.assert_allclose(model.raw_predict(x, stages=0), np.mean(y))


def test_dnn_gradients_match_finite_differences():
    for seed in range(30):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((16, 5))
        y = rng.standard_normal(16)
        params = init_dnn(5, 7, seed)
        params["b2"] = np.array([0.2])
        _, (z, _, _) = dnn_forward(params, x)
        if np.any(np.abs(z) < 1e-3):
            continue
        _, grads = dnn_gradients(params, x, y)

        def objective(p):
            pred, _ = dnn_forward(p, x)
            return float(np.mean((pred - y) ** 2))

        for name in ("w1", "b1", "w2", "b2"):
            numeric = finite_difference_gradient(objective, params, name)
            assert relative_error(grads[name], numeric) < 1e-4, name
        return
    pytest.fail("every sampled problem had a pre-activation near a ReLU kink")


def test_dnn_is_deterministic(rng):
    x = rng.random((50, 3))
    y = x.sum(axis=1)
    config = DnnConfig(hidden=8, epochs=3, batch_size=16)
    first = fit_dnn(x, y, config, seed=5)
    second = fit_dnn(x, y, config, seed=5)
    assert first.loss_history == second.loss_history
    for name in first.params:
        assert np.array_equal(first.params[name], second.params[name])


def test_dnn_learns_a_linear_target(rng):
    x = rng.random((300, 3))
    y = 1 + 2 * x[:, 0] - x[:, 1] + 0.5 * x[:, 2]
    config = DnnConfig(hidden=32, epochs=200, batch_size=32, learning_rate=0.01, dropout_rate=0.0)
    model = fit_dnn(x, y, config, seed=0)
    assert r2(y, model.raw_predict(x)) >= 0.95


def test_split_counts_and_importance_file(tmp_path, rng):
    x = rng.random((100, 3))
    y = 5 * x[:, 1]
    model = fit_gbt(x, y, BoostingConfig(learning_rate=0.5, n_estimators=5, max_depth=2), seed=0)
    counts = split_counts(model)
    internal = sum(int((tree.tree_.feature >= 0).sum()) for tree in model.trees)
    assert counts.sum() == internal
    assert counts.argmax() == 1
    write_feature_importance(model, ["a", "b", "c"], tmp_path / "importance.csv")
    raw = (tmp_path / "importance.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "feature,split_count"
    assert lines[2] == f"b,{counts[1]}"
    with pytest.raises(ConfigError):
        split_counts(fit_linear(x, y))


def test_baseline_persistence(tmp_path, rng):
    x = rng.random((40, 2))
    y = x[:, 0] * 3
    for model in (
        fit_linear(x, y),
        fit_random_forest(x, y, ForestConfig(n_estimators=3), seed=0),
        fit_gbt(x, y, BoostingConfig(n_estimators=3), seed=0),
        fit_dnn(x, y, DnnConfig(hidden=4, epochs=1), seed=0),
    ):
        save_baseline(model, tmp_path / "model.bin")
        loaded = load_baseline(tmp_path / "model.bin")
        assert type(loaded) is type(model)
        assert np.array_equal(predict_baseline(loaded, x), predict_baseline(model, x))
