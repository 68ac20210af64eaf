"""
Two-layer graph convolutional regressor with hand-derived gradients

H1 = ReLU(A X W0), H2 = ReLU(A H1 W1), y = H2 w_out + b, with A the
renormalized (symmetric) adjacency. Training is transductive: the whole graph
is propagated and the squared error is averaged over the masked nodes.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from modules import storage
from modules.config import TrainConfig, seed_pair
from modules.errors import ConfigError, DataError, FingerprintMismatchError, NumericError, ShapeError
from modules.graph import NormalizedAdjacency, adjacency_fingerprint, spmm
from modules.optim import AdamState, Params, adam_step, dropout_mask

TRAINED_KIND = "gcn-model"
PARAM_NAMES = ("w0", "w1", "w_out", "b")


@dataclass(frozen=True)
class GcnModel:
    w0: np.ndarray
    w1: np.ndarray
    w_out: np.ndarray
    b: np.ndarray
    dims: Tuple[int, int, int]
    seed: int

    def params(self) -> Params:
        return {"w0": self.w0, "w1": self.w1, "w_out": self.w_out, "b": self.b}

    def with_params(self, params: Params) -> "GcnModel":
        return GcnModel(params["w0"], params["w1"], params["w_out"], params["b"], self.dims, self.seed)


@dataclass
class ForwardCache:
    ax: np.ndarray
    z1: np.ndarray
    h1: np.ndarray
    ah1: np.ndarray
    z2: np.ndarray
    h2: np.ndarray
    mask1: Optional[np.ndarray] = None
    mask2: Optional[np.ndarray] = None


@dataclass(frozen=True)
class TrainedModel:
    model: GcnModel
    loss_history: Tuple[float, ...]
    adjacency_fingerprint: str
    log_target: bool
    norm_stats: Optional[dict] = None
    config: Dict = field(default_factory=dict)


def _uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init(dims: Tuple[int, int, int], seed: int) -> GcnModel:
    """Weights uniform in +-1/sqrt(fan_in); bias zero"""
    m, h, h2 = dims
    if min(dims) < 1:
        raise ConfigError(f"GCN dimensions must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    return GcnModel(
        w0=_uniform(rng, m, h),
        w1=_uniform(rng, h, h2),
        w_out=_uniform(rng, h2, 1),
        b=np.zeros(1),
        dims=(m, h, h2),
        seed=seed,
    )


def _check_finite(name: str, array: np.ndarray):
    if not np.all(np.isfinite(array)):
        raise NumericError(f"non-finite values in {name}; weights are diverging")


def forward(
    model: GcnModel,
    adj: NormalizedAdjacency,
    x: np.ndarray,
    masks: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    ax: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, ForwardCache]:
    """Predictions (n,) and cached activations

    Args:
        masks: inverted-dropout masks for H1 and H2 (training only)
        ax: precomputed A @ X, reused across epochs
    """
    if x.shape[1] != model.dims[0]:
        raise ShapeError(f"model expects {model.dims[0]} features, got {x.shape[1]}")
    if ax is None:
        ax = spmm(adj, x)
    z1 = ax @ model.w0
    h1 = np.maximum(z1, 0.0)
    mask1 = mask2 = None
    if masks is not None:
        mask1, mask2 = masks
        h1 = h1 * mask1
    ah1 = spmm(adj, h1)
    z2 = ah1 @ model.w1
    h2 = np.maximum(z2, 0.0)
    if masks is not None:
        h2 = h2 * mask2
    pred = (h2 @ model.w_out).ravel() + model.b[0]
    _check_finite("GCN activations", pred)
    return pred, ForwardCache(ax, z1, h1, ah1, z2, h2, mask1, mask2)


def _mask_index(mask: Sequence, n: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype == bool:
        if mask.shape != (n,):
            raise ShapeError("boolean mask must cover every node")
        mask = np.flatnonzero(mask)
    if mask.size == 0:
        raise DataError("loss mask selects no nodes")
    return mask.astype(np.int64)


def loss(predictions: np.ndarray, targets: np.ndarray, mask: Sequence) -> float:
    """Mean squared error over the masked nodes"""
    idx = _mask_index(mask, len(predictions))
    residual = predictions[idx] - np.asarray(targets, dtype=float)[idx]
    return float(np.mean(residual ** 2))


def backward(
    model: GcnModel, adj: NormalizedAdjacency, cache: ForwardCache, predictions: np.ndarray, targets: np.ndarray, mask: Sequence
) -> Params:
    """Exact gradients of the masked MSE; uses A^T = A"""
    n = len(predictions)
    idx = _mask_index(mask, n)
    g = np.zeros(n)
    g[idx] = 2.0 * (predictions[idx] - np.asarray(targets, dtype=float)[idx]) / len(idx)

    grad_b = np.array([g.sum()])
    grad_w_out = cache.h2.T @ g[:, None]
    d_h2 = g[:, None] @ model.w_out.T
    if cache.mask2 is not None:
        d_h2 = d_h2 * cache.mask2
    d_z2 = d_h2 * (cache.z2 > 0)
    grad_w1 = cache.ah1.T @ d_z2
    d_h1 = spmm(adj, d_z2 @ model.w1.T)
    if cache.mask1 is not None:
        d_h1 = d_h1 * cache.mask1
    d_z1 = d_h1 * (cache.z1 > 0)
    grad_w0 = cache.ax.T @ d_z1
    return {"w0": grad_w0, "w1": grad_w1, "w_out": grad_w_out, "b": grad_b}


def train(
    adj: NormalizedAdjacency,
    x: np.ndarray,
    targets: np.ndarray,
    mask: Sequence,
    config: TrainConfig,
    verbose: bool = False,
) -> TrainedModel:
    """Full-batch Adam training; deterministic for a fixed config.seed"""
    if config.epochs < 1:
        raise ConfigError("epochs must be at least 1")
    x = np.asarray(x, dtype=float)
    if x.shape[0] != adj.size:
        raise ShapeError(f"{x.shape[0]} feature rows for a {adj.size}-node graph")
    y = np.asarray(targets, dtype=float)
    if config.log_target:
        y = np.log1p(np.maximum(y, 0.0))
    init_seed, dropout_seed = seed_pair(config.seed)
    model = init((x.shape[1], config.hidden, config.hidden2), init_seed)
    rng = np.random.default_rng(dropout_seed)
    adam = config.adam()
    state = AdamState()
    ax = spmm(adj, x)
    n = x.shape[0]
    history: List[float] = []
    for epoch in tqdm(range(1, config.epochs + 1), desc="GCN epochs", disable=not verbose):
        masks = (
            dropout_mask(rng, (n, config.hidden), config.dropout_rate),
            dropout_mask(rng, (n, config.hidden2), config.dropout_rate),
        )
        pred, cache = forward(model, adj, x, masks, ax=ax)
        value = loss(pred, y, mask)
        if not np.isfinite(value):
            raise NumericError(f"GCN loss became non-finite at epoch {epoch}")
        history.append(value)
        grads = backward(model, adj, cache, pred, y, mask)
        params, state = adam_step(state, model.params(), grads, epoch, adam)
        model = model.with_params(params)
    return TrainedModel(
        model=model,
        loss_history=tuple(history),
        adjacency_fingerprint=adjacency_fingerprint(adj),
        log_target=config.log_target,
        config=config.model_dump(),
    )


def predict(trained: TrainedModel, adj: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
    """Per-node predicted citation counts (dropout off, transform inverted, clamped at 0)"""
    if adjacency_fingerprint(adj) != trained.adjacency_fingerprint:
        raise FingerprintMismatchError("prediction graph differs from the training graph")
    raw, _ = forward(trained.model, adj, np.asarray(x, dtype=float))
    if trained.log_target:
        raw = np.expm1(raw)
    return np.maximum(raw, 0.0)


def save_trained(trained: TrainedModel, path: Path) -> str:
    payload = {
        "params": {name: getattr(trained.model, name) for name in PARAM_NAMES},
        "dims": list(trained.model.dims),
        "seed": trained.model.seed,
        "loss_history": list(trained.loss_history),
        "adjacency_fingerprint": trained.adjacency_fingerprint,
        "log_target": trained.log_target,
        "norm_stats": trained.norm_stats,
        "config": trained.config,
    }
    return storage.write_artifact(path, TRAINED_KIND, payload)


def load_trained(path: Path) -> TrainedModel:
    payload = storage.read_artifact(path, TRAINED_KIND)
    p = payload["params"]
    model = GcnModel(p["w0"], p["w1"], p["w_out"], p["b"], tuple(payload["dims"]), payload["seed"])
    return TrainedModel(
        model=model,
        loss_history=tuple(payload["loss_history"]),
        adjacency_fingerprint=payload["adjacency_fingerprint"],
        log_target=payload["log_target"],
        norm_stats=payload["norm_stats"],
        config=payload["config"],
    )


def write_loss_history(history: Sequence[float], path: Path):
    frame = pd.DataFrame({"epoch": np.arange(len(history)), "loss": np.asarray(history, dtype=float)})
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
