"""
Adam optimizer and finite-difference gradient checks shared by the GCN and the DNN baseline
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from modules.config import AdamConfig
from modules.errors import ConfigError

Params = Dict[str, np.ndarray]


@dataclass
class AdamState:
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)
    t: int = 0


def adam_step(state: AdamState, params: Params, grads: Params, t: int, config: AdamConfig) -> Tuple[Params, AdamState]:
    """One bias-corrected Adam update; returns new parameter arrays and state"""
    if t < 1:
        raise ConfigError("Adam step counter starts at 1")
    b1, b2 = config.beta1, config.beta2
    new_params: Params = {}
    new_m: Params = {}
    new_v: Params = {}
    for name, value in params.items():
        g = grads[name]
        m = b1 * state.m.get(name, np.zeros_like(value)) + (1 - b1) * g
        v = b2 * state.v.get(name, np.zeros_like(value)) + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params[name] = value - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, t)


def finite_difference_gradient(loss_fn: Callable[[Params], float], params: Params, name: str, step: float = 1e-5) -> np.ndarray:
    """Central differences of loss_fn with respect to params[name]"""
    base = params[name]
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        shifted = dict(params)
        plus = base.copy()
        plus[idx] += step
        shifted[name] = plus
        loss_plus = loss_fn(shifted)
        minus = base.copy()
        minus[idx] -= step
        shifted[name] = minus
        loss_minus = loss_fn(shifted)
        grad[idx] = (loss_plus - loss_minus) / (2 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a|| + ||n||, tiny) over a whole tensor"""
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    """Inverted dropout: kept units scaled by 1/(1-rate)"""
    if rate <= 0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)
