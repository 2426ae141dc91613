"""Tree ensembles: bagged forests, residual boosting and second-order boosting."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientDataError
from .base import FeatureTable, RegressorConfig
from .tree import (
    TreeNode,
    fit_tree_arrays,
    grow_tree,
    leaf_weight,
    n_split_features,
    predict_tree_batch,
)

logger = logging.getLogger(__name__)


def _check_table(table: FeatureTable) -> None:
    if not isinstance(table, FeatureTable):
        raise TypeError("table must be a FeatureTable")
    if table.n_rows == 0:
        raise InsufficientDataError("cannot fit a model to an empty table")


@dataclass
class RandomForest:
    trees: list[TreeNode] = field(default_factory=list)

    def member_predictions(self, X: np.ndarray) -> np.ndarray:
        return np.vstack([predict_tree_batch(t, X) for t in self.trees])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.member_predictions(X).mean(axis=0)


def fit_rf(table: FeatureTable, config: RegressorConfig) -> RandomForest:
    """
    Bagged regression trees.

    Each tree sees a bootstrap sample of the rows (same size, with
    replacement) and draws ``max_features`` candidate features at every
    split. ``bootstrap=False`` with ``max_features=None`` turns every member
    into the plain decision tree.
    """
    _check_table(table)
    n = table.n_rows
    forest = RandomForest()
    for child in np.random.SeedSequence(config.seed).spawn(config.n_trees):
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        forest.trees.append(fit_tree_arrays(table.values[rows], table.target[rows], config, rng))
    return forest


def predict_rf(forest: RandomForest, X: np.ndarray) -> np.ndarray:
    return forest.predict(X)


@dataclass
class BoostedTrees:
    """``base + learning_rate * sum(tree(x))``; ``kind`` is ``"gbdt"`` or ``"xgb"``."""

    kind: str
    base: float
    learning_rate: float
    trees: list[TreeNode] = field(default_factory=list)

    def staged_predict(self, X: np.ndarray):
        X = np.asarray(X, dtype=np.float64)
        pred = np.full(X.shape[0], self.base)
        yield pred.copy()
        for tree in self.trees:
            pred += self.learning_rate * predict_tree_batch(tree, X)
            yield pred.copy()

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        pred = np.full(X.shape[0], self.base)
        for tree in self.trees:
            pred += self.learning_rate * predict_tree_batch(tree, X)
        return pred


def _stage_rows(n: int, config: RegressorConfig, rng: np.random.Generator) -> np.ndarray:
    if config.subsample >= 1.0:
        return np.arange(n)
    size = max(1, int(round(config.subsample * n)))
    return np.sort(rng.choice(n, size=size, replace=False))


def fit_gbdt(table: FeatureTable, config: RegressorConfig) -> BoostedTrees:
    """
    Gradient boosting on squared error.

    ``F_0`` is the target mean; stage ``m`` fits a variance-reduction tree
    to the residuals ``y - F_{m-1}`` and adds it scaled by
    ``learning_rate``. With ``subsample < 1`` each stage sees a seeded row
    sample.

    Examples
    --------
    >>> t = FeatureTable(("x",), [[0.0], [1.0], [2.0]], [1.0, 2.0, 6.0])
    >>> cfg = RegressorConfig("gbdt", n_trees=2, learning_rate=0.5, max_depth=1)
    >>> fit_gbdt(t, cfg).predict(t.values).tolist()
    [1.875, 1.875, 5.25]
    """
    _check_table(table)
    return fit_gbdt_arrays(table.values, table.target, config)


def fit_gbdt_arrays(X: np.ndarray, y: np.ndarray, config: RegressorConfig) -> BoostedTrees:
    """Residual boosting on raw arrays; targets may be any real values (e.g. 0/1 class indicators)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    model = BoostedTrees("gbdt", float(np.mean(y)), config.learning_rate)
    pred = np.full(len(y), model.base)
    for _ in range(config.n_trees):
        rows = _stage_rows(len(y), config, rng)
        tree = fit_tree_arrays(X[rows], (y - pred)[rows], config, rng)
        model.trees.append(tree)
        pred += config.learning_rate * predict_tree_batch(tree, X)
    logger.debug("gbdt: %d stages, training rmse %.4f", config.n_trees, float(np.sqrt(np.mean((y - pred) ** 2))))
    return model


def predict_gbdt(model: BoostedTrees, X: np.ndarray) -> np.ndarray:
    return model.predict(X)


def fit_xgb(table: FeatureTable, config: RegressorConfig) -> BoostedTrees:
    """
    Second-order boosting with L2-regularised leaves.

    Under squared error the per-row gradient is ``2 (F - y)`` and the
    hessian is 2. Leaves take ``-G / (H + lambda)`` and a split is kept only
    when its regularised gain is positive.

    Parameters
    ----------
    table : FeatureTable
    config : RegressorConfig
        Uses ``n_trees``, ``learning_rate``, ``max_depth``,
        ``min_samples_leaf``, ``reg_lambda``, ``subsample`` and
        ``max_features``.

    Returns
    -------
    BoostedTrees
        With ``kind="xgb"``; ``base`` is the target mean.
    """
    _check_table(table)
    X, y = table.values, table.target
    lam = config.reg_lambda
    rng = np.random.default_rng(config.seed)
    model = BoostedTrees("xgb", float(np.mean(y)), config.learning_rate)
    pred = np.full(len(y), model.base)

    def leaf(g: np.ndarray, h: np.ndarray) -> float:
        return leaf_weight(float(g.sum()), float(h.sum()), lam)

    for _ in range(config.n_trees):
        rows = _stage_rows(len(y), config, rng)
        grad = 2.0 * (pred - y)
        hess = np.full(len(y), 2.0)
        tree = grow_tree(
            X[rows],
            grad[rows],
            hess[rows],
            leaf,
            reg_lambda=lam,
            max_depth=config.max_depth,
            min_samples_leaf=config.min_samples_leaf,
            max_features=n_split_features(config, X.shape[1]),
            rng=rng,
        )
        model.trees.append(tree)
        pred += config.learning_rate * predict_tree_batch(tree, X)
    return model


def predict_xgb(model: BoostedTrees, X: np.ndarray) -> np.ndarray:
    return model.predict(X)
