"""MAPE/RMSE Pareto fronts and the experiments that show the two disagree."""
from __future__ import annotations

import logging
import math
from os import PathLike
from typing import Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .errors import ConfigurationError
from .evaluation import ScenarioOutcome
from .metrics import mape, rmse
from .regressors import FeatureTable, RegressorConfig, make_regressor

logger = logging.getLogger(__name__)


def pareto_mask(x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """
    Non-dominated points when both coordinates are minimised.

    A point is dropped iff another point is no worse in both coordinates
    and strictly better in one. Identical points keep each other.

    Examples
    --------
    >>> pareto_mask([40, 45, 50], [60, 55, 70]).tolist()
    [True, True, False]
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    order = np.lexsort((y, x))
    keep = np.zeros(len(x), dtype=bool)
    best_y = np.inf
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and x[order[j]] == x[order[i]]:
            j += 1
        group = order[i:j]
        group_min = y[group].min()
        if group_min < best_y:
            keep[group[y[group] == group_min]] = True
            best_y = group_min
        i = j
    return keep


def pareto_front(outcomes: Sequence[ScenarioOutcome]) -> list[ScenarioOutcome]:
    """Outcomes not dominated in (MAPE, RMSE), ascending by MAPE."""
    if not outcomes:
        raise ValueError("outcomes must not be empty")
    mask = pareto_mask([o.metrics.mape for o in outcomes], [o.metrics.rmse for o in outcomes])
    front = [o for o, keep in zip(outcomes, mask) if keep]
    return sorted(front, key=lambda o: o.metrics.mape)


def _scatter_frame(mapes: np.ndarray, rmses: np.ndarray) -> pd.DataFrame:
    frame = pd.DataFrame({"evaluation": np.arange(len(mapes)), "mape": mapes, "rmse": rmses})
    frame["on_front"] = pareto_mask(mapes, rmses)
    return frame


def random_vector_experiment(
    dims: int = 100,
    low: float = 1.0,
    high: float = 10.0,
    n_pairs: int = 10_000,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Score random "predictions" against random "actuals" by MAPE and RMSE.

    Each evaluation draws two uniform vectors of ``dims`` values in
    ``[low, high)``, one taken as actual and one as predicted.

    Returns
    -------
    pandas.DataFrame
        Columns ``evaluation, mape, rmse, on_front``.
    """
    if dims < 1 or n_pairs < 1:
        raise ConfigurationError("dims and n_pairs must be positive")
    if not 0 < low < high:
        raise ConfigurationError("need 0 < low < high so MAPE stays defined")
    rng = np.random.default_rng(seed)
    actual = rng.uniform(low, high, size=(n_pairs, dims))
    predicted = rng.uniform(low, high, size=(n_pairs, dims))
    mapes = 100.0 * np.mean(np.abs(actual - predicted) / actual, axis=1)
    rmses = np.sqrt(np.mean((actual - predicted) ** 2, axis=1))
    frame = _scatter_frame(mapes, rmses)
    logger.info("random vectors: %d evaluations, %d on the front", n_pairs, int(frame["on_front"].sum()))
    return frame


def _one_split(table: FeatureTable, config: RegressorConfig, n_test: int, child: np.random.SeedSequence):
    rng = np.random.default_rng(child)
    order = rng.permutation(table.n_rows)
    test, train = order[:n_test], order[n_test:]
    est = make_regressor(config.with_seed(int(child.generate_state(1)[0])))
    est.fit_table(table.subset(train))
    pred = est.predict(table.values[test])
    return mape(table.target[test], pred), rmse(table.target[test], pred)


def random_split_experiment(
    table: FeatureTable,
    config: RegressorConfig,
    n_evals: int = 1000,
    test_fraction: float = 0.1,
    seed: int = 0,
    n_jobs: int = 1,
) -> pd.DataFrame:
    """
    Repeated random train/test splits of one model, scored by MAPE and RMSE.

    Parameters
    ----------
    table : FeatureTable
    config : RegressorConfig
        Model refitted for every split (random forest in the default run).
    n_evals : int, default 1000
    test_fraction : float, default 0.1
        Share of rows held out, rounded up.
    seed : int
        Master seed; split ``i`` uses the ``i``-th spawned child.

    Returns
    -------
    pandas.DataFrame
        Columns ``evaluation, mape, rmse, on_front``.
    """
    if not 0 < test_fraction < 1:
        raise ConfigurationError("test_fraction must lie in (0, 1)")
    if n_evals < 1:
        raise ConfigurationError("n_evals must be positive")
    n_test = max(1, math.ceil(test_fraction * table.n_rows))
    if n_test >= table.n_rows:
        raise ConfigurationError("test split leaves no training rows")
    children = np.random.SeedSequence(seed).spawn(n_evals)
    scores = Parallel(n_jobs=n_jobs)(delayed(_one_split)(table, config, n_test, c) for c in children)
    mapes, rmses = (np.array(col) for col in zip(*scores))
    return _scatter_frame(mapes, rmses)


def write_scatter(
    frame: pd.DataFrame, csv_path: Union[str, PathLike], svg_path: Union[str, PathLike] | None = None, title: str = ""
) -> None:
    """Scatter CSV plus an SVG with the front highlighted."""
    frame.to_csv(csv_path, index=False, float_format="%.10g")
    if svg_path is not None:
        from .plotting import scatter_with_front

        front = frame[frame["on_front"]]
        scatter_with_front(frame["mape"], frame["rmse"], front["mape"], front["rmse"], svg_path, title=title)
