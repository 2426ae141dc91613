"""Duration regression metrics: MAPE, RMSE, MAE and SMAPE."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, MetricError

METRICS = ("mape", "rmse", "mae", "smape")


def _pair(actual, predicted) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=np.float64).ravel()
    f = np.asarray(predicted, dtype=np.float64).ravel()
    if a.shape != f.shape:
        raise DimensionError(f"actual has {a.size} values, predicted has {f.size}")
    if a.size == 0:
        raise MetricError("metrics need at least one value")
    return a, f


def mape(actual, predicted) -> float:
    """
    Mean absolute percentage error, in percent.

    Examples
    --------
    >>> round(mape([10, 20], [12, 15]), 9)
    22.5
    """
    a, f = _pair(actual, predicted)
    if np.any(a == 0):
        raise MetricError("MAPE is undefined when an actual value is 0")
    return float(100.0 * np.mean(np.abs(a - f) / np.abs(a)))


def rmse(actual, predicted) -> float:
    a, f = _pair(actual, predicted)
    return float(np.sqrt(np.mean((a - f) ** 2)))


def mae(actual, predicted) -> float:
    a, f = _pair(actual, predicted)
    return float(np.mean(np.abs(a - f)))


def smape(actual, predicted) -> float:
    """Symmetric MAPE in percent: ``100 * mean(|A - F| / ((|A| + |F|) / 2))``."""
    a, f = _pair(actual, predicted)
    denom = (np.abs(a) + np.abs(f)) / 2.0
    if np.any(denom == 0):
        raise MetricError("SMAPE is undefined when actual and predicted are both 0")
    return float(100.0 * np.mean(np.abs(a - f) / denom))


@dataclass(frozen=True)
class MetricSet:
    mape: float
    rmse: float
    mae: float
    smape: float

    @classmethod
    def evaluate(cls, actual, predicted) -> "MetricSet":
        return cls(mape(actual, predicted), rmse(actual, predicted), mae(actual, predicted), smape(actual, predicted))

    @classmethod
    def mean_of(cls, sets: Sequence["MetricSet"]) -> "MetricSet":
        if not sets:
            raise MetricError("cannot average an empty list of metric sets")
        return cls(*(float(np.mean([getattr(s, m) for s in sets])) for m in METRICS))

    def to_dict(self) -> dict:
        return asdict(self)
