"""
Regression metrics (MAE, RMSE, MAPE, R², adjusted R²) and k-fold partitioning.

All metrics take raw citation counts; models that train on log1p targets are
inverted before they get here.
"""
import json
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from modules.errors import ConfigError, DataError, NumericError

METRIC_COLUMNS = ("mae", "rmse", "mape", "r2", "adjusted_r2")
ROW_COLUMNS = ("model", "case", "fold") + METRIC_COLUMNS + ("n", "p", "mape_support")


def _pair(y, y_hat) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if len(y) != len(y_hat):
        raise DataError(f"length mismatch: {len(y)} targets, {len(y_hat)} predictions")
    if len(y) == 0:
        raise DataError("metrics need at least one sample")
    return y, y_hat


def mae(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def rmse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def mape_support(y) -> int:
    """Number of samples that enter MAPE (non-zero targets)"""
    return int(np.count_nonzero(np.asarray(y, dtype=float)))


def mape(y, y_hat) -> float:
    """Mean |y - y_hat| / |y| over samples with y != 0"""
    y, y_hat = _pair(y, y_hat)
    keep = y != 0
    if not keep.any():
        raise NumericError("MAPE is undefined when every target is zero")
    return float(np.mean(np.abs(y[keep] - y_hat[keep]) / np.abs(y[keep])))


def r2(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    if len(y) < 2:
        raise DataError("R² needs at least two samples")
    total = np.sum((y - y.mean()) ** 2)
    if total == 0:
        raise NumericError("R² is undefined for zero-variance targets")
    return float(1.0 - np.sum((y - y_hat) ** 2) / total)


def adjusted_r2(r2_value: float, n: int, p: int) -> float:
    if n <= p + 1:
        raise DataError(f"adjusted R² needs n > p + 1 (n={n}, p={p})")
    return float(1.0 - (1.0 - r2_value) * (n - 1) / (n - (p + 1)))


def kfold(ids: Sequence[str], k: int = 10, seed: int = 0) -> List[Tuple[List[str], List[str]]]:
    """k disjoint (train, validation) partitions after one seeded shuffle

    Fold sizes differ by at most one; earlier folds take the remainder.
    """
    ids = list(ids)
    if k < 2:
        raise ConfigError("k-fold needs k >= 2")
    if len(ids) < k:
        raise DataError(f"cannot split {len(ids)} ids into {k} folds")
    order = np.random.default_rng(seed).permutation(len(ids))
    folds = np.array_split(order, k)
    partitions = []
    for fold in folds:
        held_out = set(fold.tolist())
        train = [ids[i] for i in order if i not in held_out]
        partitions.append((train, [ids[i] for i in fold]))
    return partitions


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    rmse: float
    mape: float
    r2: float
    adjusted_r2: float
    n: int
    p: int
    mape_support: int
    model: str = ""
    case: str = ""
    fold: str = "test"

    def to_json(self) -> str:
        data = asdict(self)
        # JSON has no NaN; undefined metrics travel as null
        for key in METRIC_COLUMNS:
            if isinstance(data[key], float) and math.isnan(data[key]):
                data[key] = None
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        data = json.loads(text)
        for key in METRIC_COLUMNS:
            if data.get(key) is None:
                data[key] = float("nan")
        return cls(**data)

    def to_row(self) -> Dict[str, object]:
        return {col: getattr(self, col) for col in ROW_COLUMNS}


def evaluate(
    y,
    y_hat,
    p: int,
    model: str = "",
    case: str = "",
    fold: str = "test",
    strict: bool = True,
) -> MetricsReport:
    """All five metrics on raw counts

    With strict=False a metric that is undefined on this sample (all-zero
    targets for MAPE, n <= p + 1 for adjusted R²) is reported as NaN instead
    of raising, which keeps small cross-validation folds usable.
    """
    y, y_hat = _pair(y, y_hat)

    def guarded(fn, *args) -> float:
        if strict:
            return fn(*args)
        try:
            return fn(*args)
        except (DataError, NumericError):
            return float("nan")

    r2_value = guarded(r2, y, y_hat)
    adj = guarded(adjusted_r2, r2_value, len(y), p) if not math.isnan(r2_value) else float("nan")
    return MetricsReport(
        mae=mae(y, y_hat),
        rmse=rmse(y, y_hat),
        mape=guarded(mape, y, y_hat),
        r2=r2_value,
        adjusted_r2=adj,
        n=len(y),
        p=int(p),
        mape_support=mape_support(y),
        model=model,
        case=case,
        fold=str(fold),
    )


def summarize_folds(reports: Sequence[MetricsReport]) -> Dict[str, Optional[float]]:
    """Mean of each metric across folds, ignoring undefined values"""
    summary: Dict[str, Optional[float]] = {}
    for key in METRIC_COLUMNS:
        values = [getattr(r, key) for r in reports if not math.isnan(getattr(r, key))]
        summary[key] = float(np.mean(values)) if values else None
    return summary
