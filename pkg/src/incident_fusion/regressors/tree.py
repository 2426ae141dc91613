"""Regression trees grown by exact greedy split search."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import InsufficientDataError
from .base import FeatureTable, RegressorConfig


@dataclass
class TreeNode:
    """A split (``feature``, ``threshold``, children) or a leaf (``value``)."""

    value: float | None = None
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def n_leaves(self) -> int:
        return 1 if self.is_leaf else self.left.n_leaves() + self.right.n_leaves()

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeNode":
        if "value" in data:
            return cls(value=float(data["value"]))
        return cls(
            feature=int(data["feature"]),
            threshold=float(data["threshold"]),
            left=cls.from_dict(data["left"]),
            right=cls.from_dict(data["right"]),
        )


def leaf_weight(G: float, H: float, reg_lambda: float) -> float:
    """
    Optimal second-order leaf weight ``-G / (H + lambda)``.

    Examples
    --------
    >>> leaf_weight(-4.0, 4.0, 1.0)
    0.8
    """
    denom = H + reg_lambda
    return 0.0 if denom == 0 else -G / denom


def split_gain(G_L: float, H_L: float, G_R: float, H_R: float, reg_lambda: float) -> float:
    """``0.5 * [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)]``."""
    def score(G, H):
        return G * G / (H + reg_lambda) if H + reg_lambda > 0 else 0.0

    return 0.5 * (score(G_L, H_L) + score(G_R, H_R) - score(G_L + G_R, H_L + H_R))


@dataclass(frozen=True)
class _Split:
    gain: float
    feature: int
    threshold: float


def find_best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    reg_lambda: float,
    min_samples_leaf: int,
    features: np.ndarray,
) -> _Split | None:
    """
    Exhaustive search over midpoints of consecutive distinct values.

    ``g`` and ``h`` are per-row first and second order statistics. With
    ``g = y``, ``h = 1`` and ``reg_lambda = 0`` the gain is half the SSE
    decrease of the split. Returns the strictly best positive-gain split,
    earliest feature and lowest threshold winning ties.
    """
    n = len(g)
    if n < 2 * min_samples_leaf:
        return None
    G, H = g.sum(), h.sum()
    if reg_lambda == 0 and H > 0:
        # gain is invariant to shifting g along h
        g = g - (G / H) * h
        G = 0.0
    parent = G * G / (H + reg_lambda) if H + reg_lambda > 0 else 0.0
    best = None
    lo, hi = min_samples_leaf - 1, n - min_samples_leaf
    for j in features:
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        G_L = np.cumsum(g[order])[:-1]
        H_L = np.cumsum(h[order])[:-1]
        G_R, H_R = G - G_L, H - H_L
        valid = xs[:-1] < xs[1:]
        valid[:lo] = False
        valid[hi:] = False
        if not valid.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = 0.5 * (G_L**2 / (H_L + reg_lambda) + G_R**2 / (H_R + reg_lambda) - parent)
        gains = np.where(valid & np.isfinite(gains), gains, -np.inf)
        i = int(np.argmax(gains))
        if gains[i] > 0 and (best is None or gains[i] > best.gain):
            best = _Split(float(gains[i]), int(j), float((xs[i] + xs[i + 1]) / 2.0))
    return best


def grow_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    leaf: Callable[[np.ndarray, np.ndarray], float],
    reg_lambda: float = 0.0,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    depth: int = 0,
) -> TreeNode:
    """Recursive greedy growth; ``leaf(g, h)`` gives the value of a terminal node."""
    if (max_depth is not None and depth >= max_depth) or (reg_lambda == 0 and np.ptp(g) == 0):
        return TreeNode(value=leaf(g, h))
    n_features = X.shape[1]
    if max_features is not None and max_features < n_features:
        features = np.sort(rng.choice(n_features, size=max_features, replace=False))
    else:
        features = np.arange(n_features)
    split = find_best_split(X, g, h, reg_lambda, min_samples_leaf, features)
    if split is None:
        return TreeNode(value=leaf(g, h))
    mask = X[:, split.feature] <= split.threshold
    kwargs = dict(
        leaf=leaf, reg_lambda=reg_lambda, max_depth=max_depth, min_samples_leaf=min_samples_leaf,
        max_features=max_features, rng=rng, depth=depth + 1,
    )
    return TreeNode(
        feature=split.feature,
        threshold=split.threshold,
        left=grow_tree(X[mask], g[mask], h[mask], **kwargs),
        right=grow_tree(X[~mask], g[~mask], h[~mask], **kwargs),
    )


def _mean_leaf(y: np.ndarray, _h: np.ndarray) -> float:
    return float(y[0]) if np.ptp(y) == 0 else float(np.mean(y))


def n_split_features(config: RegressorConfig, n_features: int) -> int | None:
    if config.max_features is None:
        return None
    if config.max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(n_features)))
    return max(1, math.ceil(config.max_features * n_features))


def fit_tree_arrays(
    X: np.ndarray, y: np.ndarray, config: RegressorConfig, rng: np.random.Generator | None = None
) -> TreeNode:
    """Variance-reduction tree on raw arrays (targets may be residuals of any sign)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return grow_tree(
        X,
        y,
        np.ones_like(y),
        _mean_leaf,
        max_depth=config.max_depth,
        min_samples_leaf=config.min_samples_leaf,
        max_features=n_split_features(config, X.shape[1]),
        rng=rng if rng is not None else np.random.default_rng(config.seed),
    )


def fit_tree(table: FeatureTable, config: RegressorConfig) -> TreeNode:
    """
    Fit a regression tree by greedy variance reduction.

    Parameters
    ----------
    table : FeatureTable
    config : RegressorConfig
        Uses ``max_depth``, ``min_samples_leaf`` and ``max_features``.

    Returns
    -------
    TreeNode
        Root of the fitted tree. Leaves hold the mean target of their rows.

    Raises
    ------
    InsufficientDataError
        If the table has no rows.

    Examples
    --------
    >>> t = FeatureTable(("x",), [[0.0], [0.0], [1.0], [1.0]], [1, 1, 9, 9])
    >>> root = fit_tree(t, RegressorConfig("dt"))
    >>> root.threshold, root.left.value, root.right.value
    (0.5, 1.0, 9.0)
    """
    if not isinstance(table, FeatureTable):
        raise TypeError("table must be a FeatureTable")
    if table.n_rows == 0:
        raise InsufficientDataError("cannot fit a tree to an empty table")
    return fit_tree_arrays(table.values, table.target, config)


def predict_tree(node: TreeNode, row) -> float:
    while not node.is_leaf:
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.value


def predict_tree_batch(node: TreeNode, X: np.ndarray) -> np.ndarray:
    """Vectorised :func:`predict_tree` over the rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0])

    def descend(node: TreeNode, idx: np.ndarray) -> None:
        if idx.size == 0:
            return
        if node.is_leaf:
            out[idx] = node.value
            return
        go_left = X[idx, node.feature] <= node.threshold
        descend(node.left, idx[go_left])
        descend(node.right, idx[~go_left])

    descend(node, np.arange(X.shape[0]))
    return out
