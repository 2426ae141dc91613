"""k-nearest-neighbour regression on standardised features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .base import FeatureTable


@dataclass
class KnnModel:
    k: int
    mean: np.ndarray
    scale: np.ndarray
    train_z: np.ndarray
    train_y: np.ndarray

    def neighbours(self, X: np.ndarray) -> np.ndarray:
        """Indices of the ``k`` nearest training rows; equal distances keep row order."""
        Z = (np.atleast_2d(np.asarray(X, dtype=np.float64)) - self.mean) / self.scale
        d2 = ((Z[:, None, :] - self.train_z[None, :, :]) ** 2).sum(axis=2)
        return np.argsort(d2, axis=1, kind="stable")[:, : self.k]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.train_y[self.neighbours(X)].mean(axis=1)


def fit_knn(table: FeatureTable, k: int) -> KnnModel:
    """
    Store the standardised training rows.

    Features are scaled by the training mean and standard deviation
    (constant columns keep scale 1).

    Raises
    ------
    ConfigurationError
        If ``k`` exceeds the number of rows.
    """
    if not isinstance(table, FeatureTable):
        raise TypeError("table must be a FeatureTable")
    if k < 1 or k > table.n_rows:
        raise ConfigurationError(f"k must lie in [1, {table.n_rows}], got {k}")
    mean = table.values.mean(axis=0)
    scale = table.values.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return KnnModel(k, mean, scale, (table.values - mean) / scale, table.target.copy())


def predict_knn(model: KnnModel, row) -> float:
    return float(model.predict(np.asarray(row, dtype=np.float64)[None, :])[0])
