"""One fit/predict front for every model kind, plus JSON persistence."""
from __future__ import annotations

import json
from os import PathLike
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from ..errors import ConfigurationError, DimensionError, MissingArtifactError
from .base import FeatureTable, RegressorConfig
from .ensemble import BoostedTrees, RandomForest, fit_gbdt, fit_rf, fit_xgb
from .linear import LinearModel, fit_ols, fit_svr
from .neighbors import KnnModel, fit_knn
from .tree import TreeNode, fit_tree, predict_tree_batch

FORMAT_NAME = "incident-fusion-regressor"
FORMAT_VERSION = 1


class Estimator:
    """
    ``fit(X, y)`` / ``predict(X)`` wrapper around the model zoo.

    Examples
    --------
    >>> est = make_regressor(RegressorConfig("ols"))
    >>> est.fit([[1.0], [2.0], [3.0]], [3.0, 5.0, 7.0]).predict([[4.0]]).round(6).tolist()
    [9.0]
    """

    def __init__(self, config: RegressorConfig, feature_names: Sequence[str] | None = None):
        self.config = config
        self.feature_names = tuple(feature_names) if feature_names is not None else None
        self.model = None

    def fit(self, X, y) -> "Estimator":
        X = np.asarray(X, dtype=np.float64)
        names = self.feature_names or tuple(f"x{i}" for i in range(X.shape[1]))
        return self.fit_table(FeatureTable(names, X, y))

    def fit_table(self, table: FeatureTable) -> "Estimator":
        kind = self.config.kind
        if kind == "dt":
            self.model = fit_tree(table, self.config)
        elif kind == "rf":
            self.model = fit_rf(table, self.config)
        elif kind == "gbdt":
            self.model = fit_gbdt(table, self.config)
        elif kind == "xgb":
            self.model = fit_xgb(table, self.config)
        elif kind == "knn":
            self.model = fit_knn(table, self.config.k)
        elif kind == "ols":
            self.model = fit_ols(table)
        else:
            self.model = fit_svr(table, self.config)
        self.feature_names = table.feature_names
        return self

    def predict(self, X) -> np.ndarray:
        if self.model is None:
            raise ConfigurationError("estimator is not fitted")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != len(self.feature_names):
            raise DimensionError(f"expected {len(self.feature_names)} features, got {X.shape[1]}")
        if isinstance(self.model, TreeNode):
            return predict_tree_batch(self.model, X)
        return self.model.predict(X)

    def to_dict(self) -> dict:
        if self.model is None:
            raise ConfigurationError("estimator is not fitted")
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "feature_names": list(self.feature_names),
            "model": _model_to_dict(self.model),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Estimator":
        if data.get("format") != FORMAT_NAME or data.get("version") != FORMAT_VERSION:
            raise ConfigurationError(f"not a version {FORMAT_VERSION} regressor document")
        est = cls(RegressorConfig(**data["config"]), data["feature_names"])
        est.model = _model_from_dict(data["model"])
        return est


def make_regressor(config: RegressorConfig, feature_names: Sequence[str] | None = None) -> Estimator:
    if not isinstance(config, RegressorConfig):
        raise TypeError("config must be a RegressorConfig")
    return Estimator(config, feature_names)


def _model_to_dict(model) -> dict:
    if isinstance(model, TreeNode):
        return {"type": "tree", "root": model.to_dict()}
    if isinstance(model, RandomForest):
        return {"type": "forest", "trees": [t.to_dict() for t in model.trees]}
    if isinstance(model, BoostedTrees):
        return {
            "type": "boosted",
            "kind": model.kind,
            "base": model.base,
            "learning_rate": model.learning_rate,
            "trees": [t.to_dict() for t in model.trees],
        }
    if isinstance(model, LinearModel):
        return {"type": "linear", "kind": model.kind, "coef": model.coef.tolist(), "intercept": model.intercept}
    if isinstance(model, KnnModel):
        return {
            "type": "knn",
            "k": model.k,
            "mean": model.mean.tolist(),
            "scale": model.scale.tolist(),
            "train_z": model.train_z.tolist(),
            "train_y": model.train_y.tolist(),
        }
    raise TypeError(f"cannot serialise {type(model).__name__}")


def _model_from_dict(data: dict):
    kind = data["type"]
    if kind == "tree":
        return TreeNode.from_dict(data["root"])
    if kind == "forest":
        return RandomForest([TreeNode.from_dict(t) for t in data["trees"]])
    if kind == "boosted":
        return BoostedTrees(
            data["kind"], float(data["base"]), float(data["learning_rate"]),
            [TreeNode.from_dict(t) for t in data["trees"]],
        )
    if kind == "linear":
        return LinearModel(data["kind"], np.asarray(data["coef"], dtype=np.float64), float(data["intercept"]))
    if kind == "knn":
        return KnnModel(
            int(data["k"]),
            np.asarray(data["mean"]),
            np.asarray(data["scale"]),
            np.asarray(data["train_z"]).reshape(len(data["train_y"]), -1),
            np.asarray(data["train_y"]),
        )
    raise ConfigurationError(f"unknown model type '{kind}'")


def save_regressor(estimator: Estimator, path: Union[str, PathLike]) -> None:
    Path(path).write_text(json.dumps(estimator.to_dict(), sort_keys=True))


def load_regressor(path: Union[str, PathLike]) -> Estimator:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(str(path))
    return Estimator.from_dict(json.loads(path.read_text()))
