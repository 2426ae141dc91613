"""Feature tables, regressor configuration and the shared fit/predict contract."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Protocol, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import ConfigurationError, DimensionError

KINDS = ("dt", "rf", "gbdt", "xgb", "knn", "ols", "svr")


@dataclass(frozen=True)
class FeatureTable:
    """
    Rows of numeric features with a positive duration target in minutes.

    Parameters
    ----------
    feature_names : sequence of str
        Column names, in column order.
    values : array-like of shape (n_rows, n_features)
    target : array-like of shape (n_rows,)
    row_ids : sequence of str, optional
        Incident ids, kept for joins and reports.
    """

    feature_names: tuple[str, ...]
    values: np.ndarray
    target: np.ndarray
    row_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        names = tuple(self.feature_names)
        values = np.asarray(self.values, dtype=np.float64)
        target = np.asarray(self.target, dtype=np.float64)
        if values.ndim == 1 and not names:
            values = values.reshape(len(values), 0)
        if values.ndim != 2 or values.shape[1] != len(names):
            raise DimensionError(f"values shape {values.shape} does not match {len(names)} feature names")
        if target.shape != (values.shape[0],):
            raise DimensionError(f"target has shape {target.shape}, expected ({values.shape[0]},)")
        if len(set(names)) != len(names):
            raise ConfigurationError("feature names must be unique")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(target)):
            raise ValueError("feature table must not contain NaN or infinite values")
        if np.any(target <= 0):
            raise ValueError("target durations must be positive")
        row_ids = tuple(str(r) for r in self.row_ids)
        if row_ids and len(row_ids) != len(target):
            raise DimensionError("row_ids must have one entry per row")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "row_ids", row_ids)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def subset(self, rows: Union[Sequence[int], np.ndarray]) -> "FeatureTable":
        rows = np.asarray(rows, dtype=int)
        ids = tuple(self.row_ids[i] for i in rows) if self.row_ids else ()
        return FeatureTable(self.feature_names, self.values[rows], self.target[rows], ids)

    def with_columns(self, names: Sequence[str], block: np.ndarray) -> "FeatureTable":
        """Append columns (e.g. an encoded vector block) to the right."""
        block = np.asarray(block, dtype=np.float64).reshape(self.n_rows, len(names))
        return FeatureTable(
            self.feature_names + tuple(names),
            np.hstack([self.values, block]),
            self.target,
            self.row_ids,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=list(self.feature_names))
        frame["duration_min"] = self.target
        if self.row_ids:
            frame.index = pd.Index(self.row_ids, name="incident_id")
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, target: str = "duration_min") -> "FeatureTable":
        if not isinstance(frame, pd.DataFrame):
            raise TypeError("frame must be a pandas DataFrame")
        if target not in frame.columns:
            raise ConfigurationError(f"frame has no target column '{target}'")
        features = frame.drop(columns=[target])
        return cls(
            tuple(str(c) for c in features.columns),
            features.to_numpy(dtype=np.float64),
            frame[target].to_numpy(dtype=np.float64),
            tuple(str(i) for i in frame.index) if frame.index.name == "incident_id" else (),
        )


@dataclass(frozen=True)
class RegressorConfig:
    """
    Model kind plus every hyper-parameter the zoo understands.

    Parameters that do not apply to ``kind`` are ignored. ``max_depth=None``
    grows trees until leaves are pure or too small. ``max_features`` is
    ``"sqrt"``, ``None`` (all features) or a fraction in (0, 1].
    """

    kind: str
    max_depth: int | None = None
    min_samples_leaf: int = 1
    n_trees: int = 100
    learning_rate: float = 0.1
    subsample: float = 1.0
    max_features: Union[str, float, None] = None
    bootstrap: bool = True
    k: int = 5
    reg_lambda: float = 1.0
    epsilon: float = 1.0
    svr_lr: float = 0.5
    epochs: int = 1000
    C: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"kind must be one of {KINDS}, got '{self.kind}'")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigurationError("max_depth must be at least 1")
        if self.min_samples_leaf < 1:
            raise ConfigurationError("min_samples_leaf must be at least 1")
        min_trees = 1 if self.kind == "rf" else 0
        if self.n_trees < min_trees:
            raise ConfigurationError(f"n_trees must be at least {min_trees} for {self.kind}")
        if not 0 < self.learning_rate <= 1:
            raise ConfigurationError("learning_rate must lie in (0, 1]")
        if not 0 < self.subsample <= 1:
            raise ConfigurationError("subsample must lie in (0, 1]")
        if isinstance(self.max_features, str):
            if self.max_features != "sqrt":
                raise ConfigurationError("max_features must be 'sqrt', None or a fraction")
        elif self.max_features is not None and not 0 < self.max_features <= 1:
            raise ConfigurationError("max_features fraction must lie in (0, 1]")
        if self.k < 1:
            raise ConfigurationError("k must be at least 1")
        if self.reg_lambda < 0:
            raise ConfigurationError("reg_lambda must be non-negative")
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be non-negative")
        if self.svr_lr <= 0 or self.C <= 0 or self.epochs < 1:
            raise ConfigurationError("svr_lr, C and epochs must be positive")

    def with_seed(self, seed: int) -> "RegressorConfig":
        return replace(self, seed=int(seed))

    def with_params(self, **params) -> "RegressorConfig":
        unknown = set(params) - set(self.to_dict())
        if unknown:
            raise ConfigurationError(f"unknown hyper-parameter(s): {sorted(unknown)}")
        return replace(self, **params)

    def to_dict(self) -> dict:
        return asdict(self)


def default_configs(seed: int = 0) -> dict[str, RegressorConfig]:
    """One default hyper-parameter set per model kind."""
    return {
        "dt": RegressorConfig("dt", max_depth=8, min_samples_leaf=5, seed=seed),
        "rf": RegressorConfig("rf", n_trees=100, max_depth=8, max_features="sqrt", seed=seed),
        "gbdt": RegressorConfig("gbdt", n_trees=100, max_depth=3, learning_rate=0.1, seed=seed),
        "xgb": RegressorConfig("xgb", n_trees=100, max_depth=3, learning_rate=0.1, reg_lambda=1.0, seed=seed),
        "knn": RegressorConfig("knn", k=5, seed=seed),
        "ols": RegressorConfig("ols", seed=seed),
        "svr": RegressorConfig("svr", epsilon=5.0, C=1.0, seed=seed),
    }


TUNING_GRIDS = {
    "dt": {"max_depth": [3, 5, 8], "min_samples_leaf": [1, 5]},
    "rf": {"n_trees": [100, 300], "max_depth": [3, 5, 8], "min_samples_leaf": [1, 5]},
    "gbdt": {"n_trees": [100, 300], "max_depth": [3, 5, 8], "learning_rate": [0.05, 0.1]},
    "xgb": {
        "n_trees": [100, 300],
        "max_depth": [3, 5, 8],
        "learning_rate": [0.05, 0.1],
        "reg_lambda": [0.0, 1.0, 10.0],
    },
    "knn": {"k": [3, 5, 9]},
    "ols": {},
    "svr": {},
}


class Regressor(Protocol):
    def fit(self, X: np.ndarray, y: np.ndarray) -> "Regressor":
        ...

    def predict(self, X: np.ndarray) -> np.ndarray:
        ...
