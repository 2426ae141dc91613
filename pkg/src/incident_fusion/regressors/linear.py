"""Linear models: least squares by QR and epsilon-insensitive linear SVR."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDataError, SingularMatrixError
from .base import FeatureTable, RegressorConfig

logger = logging.getLogger(__name__)


@dataclass
class LinearModel:
    """``x @ coef + intercept`` on raw features (scaling folded in)."""

    kind: str
    coef: np.ndarray
    intercept: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercept


def fit_ols(table: FeatureTable) -> LinearModel:
    """
    Ordinary least squares with an intercept.

    Solves ``min ||y - X b||`` through a QR factorisation of the design
    matrix ``[1, X]``.

    Raises
    ------
    InsufficientDataError
        If there are not more rows than features.
    SingularMatrixError
        If a column is (numerically) a combination of the ones before it;
        the error names that column.

    Examples
    --------
    >>> t = FeatureTable(("x",), [[1.0], [2.0], [3.0]], [3.0, 5.0, 7.0])
    >>> m = fit_ols(t)
    >>> round(float(m.coef[0]), 6), round(m.intercept, 6)
    (2.0, 1.0)
    """
    if not isinstance(table, FeatureTable):
        raise TypeError("table must be a FeatureTable")
    n, p = table.values.shape
    if n <= p:
        raise InsufficientDataError(f"least squares needs more rows than features ({n} <= {p})")
    design = np.hstack([np.ones((n, 1)), table.values])
    names = ("intercept",) + table.feature_names
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    tol = max(design.shape) * np.finfo(np.float64).eps * diag.max()
    for j, d in enumerate(diag):
        if d <= tol:
            raise SingularMatrixError(names[j])
    beta = np.linalg.solve(r, q.T @ table.target)
    return LinearModel("ols", beta[1:], float(beta[0]))


def svr_loss(residuals: np.ndarray, epsilon: float) -> np.ndarray:
    """Epsilon-insensitive loss ``max(0, |r| - epsilon)``; symmetric in the sign of ``r``."""
    return np.maximum(0.0, np.abs(residuals) - epsilon)


def fit_svr(table: FeatureTable, config: RegressorConfig) -> LinearModel:
    """
    Linear epsilon-insensitive support vector regression.

    Minimises ``C * sum(max(0, |y - (w.x + b)| - epsilon)) + 0.5 * ||w||^2``
    over standardised features by full-batch subgradient descent with step
    ``svr_lr / sqrt(t)`` for ``epochs`` steps, returning the average of the
    iterates of the second half.

    Notes
    -----
    The target is standardised too; the penalty becomes ``C / sd(y)`` and
    ``epsilon / sd(y)`` so the minimiser is unchanged. ``b`` starts at the
    median target and ``w`` at zero, so with an epsilon wider than every
    residual the weights never move.
    """
    if not isinstance(table, FeatureTable):
        raise TypeError("table must be a FeatureTable")
    if table.n_rows == 0:
        raise InsufficientDataError("cannot fit a model to an empty table")
    X, y = table.values, table.target
    n = len(y)
    mu, sd = X.mean(axis=0), X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    y_mu, y_sd = float(y.mean()), float(y.std())
    y_sd = y_sd if y_sd > 0 else 1.0
    Z = (X - mu) / sd
    t_std = (y - y_mu) / y_sd
    eps = config.epsilon / y_sd
    reg = 1.0 / (n * config.C / y_sd)

    w = np.zeros(Z.shape[1])
    b = float(np.median(t_std))
    w_sum, b_sum, kept = np.zeros_like(w), 0.0, 0
    tail_start = config.epochs // 2
    for t in range(1, config.epochs + 1):
        r = t_std - (Z @ w + b)
        active = np.sign(r) * (np.abs(r) > eps)
        grad_w = -(active @ Z) / n + reg * w
        grad_b = -active.sum() / n
        step = config.svr_lr / np.sqrt(t)
        w = w - step * grad_w
        b = b - step * grad_b
        if t > tail_start:
            w_sum += w
            b_sum += b
            kept += 1
    w, b = w_sum / kept, b_sum / kept

    coef = w * y_sd / sd
    intercept = y_mu + y_sd * b - float(coef @ mu)
    return LinearModel("svr", coef, intercept)
