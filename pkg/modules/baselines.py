"""
Comparison models: ridge linear regression, random forest, gradient-boosted
trees and a one-hidden-layer neural network.

Trees are scikit-learn CART regressors; the bagging and boosting loops around
them live here so each config field maps onto one line of code.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.tree import DecisionTreeRegressor
from tqdm import tqdm

from modules import storage
from modules.config import BoostingConfig, DnnConfig, ForestConfig
from modules.errors import ConfigError, DataError, NumericError, ShapeError
from modules.optim import AdamState, Params, adam_step, dropout_mask

BASELINE_KIND = "baseline-model"


def _as_xy(x, y=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ShapeError("feature matrix must be two-dimensional")
    if x.shape[0] < 1:
        raise DataError("at least one training row is required")
    if y is None:
        return x
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != x.shape[0]:
        raise ShapeError(f"{x.shape[0]} rows but {len(y)} targets")
    return x, y


def _child_seeds(seed: int, count: int) -> List[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    n_features: int
    log_target: bool = False

    def raw_predict(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.bias


def fit_linear(x_train, y_train, ridge_lambda: float = 1e-8, log_target: bool = False) -> LinearModel:
    """Ridge normal equations on centered data; the bias is not penalized"""
    x, y = _as_xy(x_train, y_train)
    if log_target:
        y = np.log1p(np.maximum(y, 0.0))
    x_mean = x.mean(axis=0)
    y_mean = y.mean()
    xc = x - x_mean
    gram = xc.T @ xc + ridge_lambda * np.eye(x.shape[1])
    if ridge_lambda == 0 and np.linalg.matrix_rank(gram) < x.shape[1]:
        raise NumericError("singular normal equations; use a positive ridge_lambda")
    try:
        weights = np.linalg.solve(gram, xc.T @ (y - y_mean))
    except np.linalg.LinAlgError as e:
        raise NumericError(f"cannot solve normal equations: {e}") from e
    return LinearModel(weights, float(y_mean - x_mean @ weights), x.shape[1], log_target)


@dataclass(frozen=True)
class ForestModel:
    trees: Tuple[DecisionTreeRegressor, ...]
    n_features: int
    log_target: bool = False

    def raw_predict(self, x: np.ndarray) -> np.ndarray:
        return np.mean([tree.predict(x) for tree in self.trees], axis=0)


def fit_random_forest(x, y, config: ForestConfig, seed: int, log_target: bool = False) -> ForestModel:
    """Bagged depth-limited CART trees with sqrt(m) features tried per split"""
    x, y = _as_xy(x, y)
    if log_target:
        y = np.log1p(np.maximum(y, 0.0))
    n = x.shape[0]

    def grow(tree_seed: int) -> DecisionTreeRegressor:
        rng = np.random.default_rng(tree_seed)
        rows = rng.integers(0, n, size=n)
        tree = DecisionTreeRegressor(
            max_depth=config.max_depth,
            min_samples_split=config.min_samples_split,
            max_features="sqrt",
            random_state=int(rng.integers(2 ** 31 - 1)),
        )
        return tree.fit(x[rows], y[rows])

    seeds = _child_seeds(seed, config.n_estimators)
    if config.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
            trees = list(pool.map(grow, seeds))
    else:
        trees = [grow(s) for s in seeds]
    return ForestModel(tuple(trees), x.shape[1], log_target)


@dataclass(frozen=True)
class BoostingModel:
    initial: float
    learning_rate: float
    trees: Tuple[DecisionTreeRegressor, ...]
    stage_mse: Tuple[float, ...]
    n_features: int
    log_target: bool = False

    def raw_predict(self, x: np.ndarray, stages: Optional[int] = None) -> np.ndarray:
        pred = np.full(x.shape[0], self.initial)
        for tree in self.trees[:stages]:
            pred += self.learning_rate * tree.predict(x)
        return pred


def fit_gbt(x, y, config: BoostingConfig, seed: int, log_target: bool = False) -> BoostingModel:
    """Squared-loss gradient boosting: F0 = mean(y), F_k = F_{k-1} + lr * tree_k(residuals)

    stage_mse[k] is the training MSE after k stages (index 0 is F0).
    """
    x, y = _as_xy(x, y)
    if log_target:
        y = np.log1p(np.maximum(y, 0.0))
    initial = float(np.mean(y))
    pred = np.full(len(y), initial)
    trees = []
    stage_mse = [float(np.mean((y - pred) ** 2))]
    for tree_seed in _child_seeds(seed, config.n_estimators):
        tree = DecisionTreeRegressor(
            max_depth=config.max_depth,
            min_samples_split=config.min_samples_split,
            random_state=tree_seed % (2 ** 31 - 1),
        )
        tree.fit(x, y - pred)
        pred = pred + config.learning_rate * tree.predict(x)
        trees.append(tree)
        stage_mse.append(float(np.mean((y - pred) ** 2)))
    return BoostingModel(initial, config.learning_rate, tuple(trees), tuple(stage_mse), x.shape[1], log_target)


@dataclass(frozen=True)
class DnnModel:
    params: Params
    loss_history: Tuple[float, ...]
    n_features: int
    log_target: bool = False

    def raw_predict(self, x: np.ndarray) -> np.ndarray:
        pred, _ = dnn_forward(self.params, x)
        return pred


def init_dnn(n_features: int, hidden: int, seed: int) -> Params:
    rng = np.random.default_rng(seed)
    b0 = 1.0 / np.sqrt(n_features)
    b1 = 1.0 / np.sqrt(hidden)
    return {
        "w1": rng.uniform(-b0, b0, size=(n_features, hidden)),
        "b1": np.zeros(hidden),
        "w2": rng.uniform(-b1, b1, size=(hidden, 1)),
        "b2": np.zeros(1),
    }


def dnn_forward(params: Params, x: np.ndarray, mask: Optional[np.ndarray] = None):
    z = x @ params["w1"] + params["b1"]
    h = np.maximum(z, 0.0)
    if mask is not None:
        h = h * mask
    pred = (h @ params["w2"]).ravel() + params["b2"][0]
    return pred, (z, h, mask)


def dnn_gradients(params: Params, x: np.ndarray, y: np.ndarray, mask: Optional[np.ndarray] = None) -> Tuple[float, Params]:
    """MSE and its exact gradients for one batch"""
    pred, (z, h, mask) = dnn_forward(params, x, mask)
    g = 2.0 * (pred - y) / len(y)
    d_h = g[:, None] @ params["w2"].T
    if mask is not None:
        d_h = d_h * mask
    d_z = d_h * (z > 0)
    grads = {
        "w1": x.T @ d_z,
        "b1": d_z.sum(axis=0),
        "w2": h.T @ g[:, None],
        "b2": np.array([g.sum()]),
    }
    return float(np.mean((pred - y) ** 2)), grads


def fit_dnn(x, y, config: DnnConfig, seed: int, log_target: bool = False, verbose: bool = False) -> DnnModel:
    """Mini-batch Adam training of one ReLU hidden layer with dropout"""
    x, y = _as_xy(x, y)
    if log_target:
        y = np.log1p(np.maximum(y, 0.0))
    init_seed, sample_seed = _child_seeds(seed, 2)
    params = init_dnn(x.shape[1], config.hidden, init_seed)
    rng = np.random.default_rng(sample_seed)
    adam = config.adam()
    state = AdamState()
    step = 0
    history: List[float] = []
    for epoch in tqdm(range(config.epochs), desc="DNN epochs", disable=not verbose):
        order = rng.permutation(len(y))
        batch_losses = []
        for start in range(0, len(y), config.batch_size):
            rows = order[start:start + config.batch_size]
            mask = dropout_mask(rng, (len(rows), config.hidden), config.dropout_rate)
            value, grads = dnn_gradients(params, x[rows], y[rows], mask)
            if not np.isfinite(value):
                raise NumericError(f"DNN loss became non-finite at epoch {epoch}")
            step += 1
            params, state = adam_step(state, params, grads, step, adam)
            batch_losses.append(value)
        history.append(float(np.mean(batch_losses)))
    return DnnModel(params, tuple(history), x.shape[1], log_target)


def predict_baseline(model, x) -> np.ndarray:
    """Finite predictions in citation units, clamped below at 0"""
    x = _as_xy(x)
    if x.shape[1] != model.n_features:
        raise ShapeError(f"model was trained on {model.n_features} features, got {x.shape[1]}")
    raw = model.raw_predict(x)
    if model.log_target:
        raw = np.expm1(raw)
    if not np.all(np.isfinite(raw)):
        raise NumericError("baseline produced non-finite predictions")
    return np.maximum(raw, 0.0)


def split_counts(model) -> np.ndarray:
    """Number of splits on each feature across all trees"""
    if not isinstance(model, (ForestModel, BoostingModel)):
        raise ConfigError("split counts exist only for tree ensembles")
    counts = np.zeros(model.n_features, dtype=np.int64)
    for tree in model.trees:
        used = tree.tree_.feature
        counts += np.bincount(used[used >= 0], minlength=model.n_features)
    return counts


def write_feature_importance(model, columns: Sequence[str], path: Path):
    frame = pd.DataFrame({"feature": list(columns), "split_count": split_counts(model)})
    frame.to_csv(path, index=False, lineterminator="\n")


def save_baseline(model, path: Path) -> str:
    return storage.write_artifact(path, BASELINE_KIND, {"type": type(model).__name__, "model": model})


def load_baseline(path: Path):
    payload = storage.read_artifact(path, BASELINE_KIND)
    return payload["model"]
