"""Cross-validation, baseline model ranking, the scenario grid and tuning."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .encoders import ACTIVATIONS, SERIES_SOURCES, SENTIMENT_SOURCES, UNITS, EncodedCache
from .errors import (
    ConfigurationError,
    FoldError,
    InsufficientDataError,
    MissingArtifactError,
)
from .ingest import IncidentRecord
from .metrics import MetricSet
from .regressors import KINDS, FeatureTable, RegressorConfig, make_regressor

logger = logging.getLogger(__name__)

N_FOLDS = 10
BASELINE_SOURCE = "baseline"
GRID_SOURCES = (SENTIMENT_SOURCES["mse"],) + SERIES_SOURCES


@dataclass(frozen=True)
class FoldPlan:
    """Row-to-fold assignment; fold sizes differ by at most one."""

    n_rows: int
    assignments: np.ndarray
    seed: int
    k: int = N_FOLDS

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()


def make_folds(n_rows: int, k: int = N_FOLDS, seed: int = 0) -> FoldPlan:
    """
    Seeded shuffle followed by round-robin assignment to ``k`` folds.

    Examples
    --------
    >>> make_folds(13, seed=0).sizes()
    [2, 2, 2, 1, 1, 1, 1, 1, 1, 1]
    """
    if k < 2:
        raise ConfigurationError("k must be at least 2")
    if n_rows < k:
        raise InsufficientDataError(f"{n_rows} rows cannot fill {k} folds")
    order = np.random.default_rng(seed).permutation(n_rows)
    assignments = np.empty(n_rows, dtype=int)
    assignments[order] = np.arange(n_rows) % k
    return FoldPlan(n_rows, assignments, seed, k)


@dataclass(frozen=True)
class ScenarioSpec:
    """One grid cell. Baseline cells carry ``source="baseline"`` and no encoder settings."""

    source: str
    units: int | None
    activation: str | None
    model: str
    seed: int = 0

    @property
    def is_baseline(self) -> bool:
        return self.source == BASELINE_SOURCE


@dataclass(frozen=True)
class ScenarioOutcome:
    spec: ScenarioSpec
    metrics: MetricSet
    per_fold: tuple[MetricSet, ...] = field(default=())

    def row(self) -> dict:
        row = {
            "model": self.spec.model,
            "source": self.spec.source,
            "units": self.spec.units,
            "activation": self.spec.activation,
            **self.metrics.to_dict(),
        }
        for i, fold in enumerate(self.per_fold):
            row[f"fold{i}_mape"] = fold.mape
        return row


def cross_validate(
    table: FeatureTable, config: RegressorConfig, plan: FoldPlan
) -> tuple[MetricSet, tuple[MetricSet, ...]]:
    """
    K-fold cross-validation of one model configuration.

    Fold ``f`` trains on every row outside ``f`` and scores the rows inside
    it. The model seed for fold ``f`` is ``config.seed ^ f``.

    Returns
    -------
    tuple
        ``(mean MetricSet, per-fold MetricSets)``.

    Raises
    ------
    FoldError
        Wrapping any fitting error, with the fold index attached.
    """
    if not isinstance(table, FeatureTable):
        raise TypeError("table must be a FeatureTable")
    if plan.n_rows != table.n_rows:
        raise ConfigurationError(f"fold plan covers {plan.n_rows} rows, table has {table.n_rows}")
    per_fold = []
    for fold in range(plan.k):
        train, test = plan.train_rows(fold), plan.test_rows(fold)
        try:
            est = make_regressor(config.with_seed(config.seed ^ fold))
            est.fit_table(table.subset(train))
            pred = est.predict(table.values[test])
        except Exception as exc:
            raise FoldError(fold, exc) from exc
        per_fold.append(MetricSet.evaluate(table.target[test], pred))
    return MetricSet.mean_of(per_fold), tuple(per_fold)


def build_baseline_table(records: Sequence[IncidentRecord], include_severity: bool = True) -> FeatureTable:
    """Baseline features (plus severity) of each incident with its duration as target."""
    if not records:
        raise InsufficientDataError("no incidents to build a feature table from")
    names = list(records[0].baseline_names)
    for rec in records:
        if rec.baseline_names != names:
            raise ConfigurationError(f"incident {rec.id} has baseline columns {rec.baseline_names}, expected {names}")
    values = np.array([rec.baseline_values for rec in records], dtype=np.float64).reshape(len(records), len(names))
    if include_severity:
        names = ["severity"] + names
        values = np.hstack([np.array([[rec.severity] for rec in records], dtype=np.float64), values])
    return FeatureTable(
        tuple(names),
        values,
        [rec.duration_min for rec in records],
        tuple(rec.id for rec in records),
    )


def fuse(table: FeatureTable, encoded: pd.DataFrame, source: str) -> FeatureTable:
    """
    Append the encoded vector of each row's incident to the baseline columns.

    Raises
    ------
    MissingArtifactError
        If an incident of the table has no encoded vector.
    """
    if not table.row_ids:
        raise ConfigurationError("fusion needs a table with incident ids")
    missing = [rid for rid in table.row_ids if rid not in encoded.index]
    if missing:
        raise MissingArtifactError(f"{source} encoding of incident {missing[0]}", "incident-fusion train-encoders")
    block = encoded.loc[list(table.row_ids)].to_numpy(dtype=np.float64)
    names = [f"{source}_{c}" for c in encoded.columns]
    return table.with_columns(names, block)


def grid_specs(
    models: Sequence[str],
    sources: Sequence[str] = GRID_SOURCES,
    units: Sequence[int] = UNITS,
    activations: Sequence[str] = ACTIVATIONS,
    seed: int = 0,
) -> list[ScenarioSpec]:
    """
    Every (model, source, units, activation) cell with its own seed.

    Seeds come from one ``SeedSequence`` of the master seed, in enumeration
    order, so a cell's seed never depends on scheduling.
    """
    cells = list(itertools.product(models, sources, units, activations))
    children = np.random.SeedSequence(seed).spawn(len(cells))
    return [
        ScenarioSpec(source, int(u), act, model, int(child.generate_state(1)[0]))
        for (model, source, u, act), child in zip(cells, children)
    ]


def _run_cell(
    spec: ScenarioSpec, table: FeatureTable, encoded: pd.DataFrame | None, config: RegressorConfig, plan: FoldPlan
) -> ScenarioOutcome:
    fused = table if spec.is_baseline else fuse(table, encoded, spec.source)
    metrics, per_fold = cross_validate(fused, config.with_seed(spec.seed), plan)
    return ScenarioOutcome(spec, metrics, per_fold)


def _run_ranked_cell(spec, table, config, plan) -> ScenarioOutcome:
    try:
        return _run_cell(spec, table, None, config, plan)
    except FoldError as exc:
        logger.error("baseline %s failed: %s", spec.model, exc)
        return ScenarioOutcome(spec, MetricSet(*([float("inf")] * 4)))


def _outcome_key(o: ScenarioOutcome):
    return (o.metrics.mape, o.spec.source, o.spec.units or 0, o.spec.activation or "")


def rank_baseline_models(
    table: FeatureTable,
    configs: Mapping[str, RegressorConfig],
    seed: int = 0,
    k: int = N_FOLDS,
    n_jobs: int = 1,
) -> list[ScenarioOutcome]:
    """
    Cross-validate every configured model on the baseline features alone.

    Returns
    -------
    list of ScenarioOutcome
        Ascending by MAPE (ties by model name); the first three models are
        the ones the grid runs by default. A model that fails to fit is
        logged and ranked last with infinite metrics.
    """
    if not configs:
        raise ConfigurationError("no models configured")
    plan = make_folds(table.n_rows, k, seed)
    kinds = sorted(configs)
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_run_ranked_cell)(ScenarioSpec(BASELINE_SOURCE, None, None, kind, configs[kind].seed), table, configs[kind], plan)
        for kind in kinds
    )
    ranked = sorted(outcomes, key=lambda o: (o.metrics.mape, o.spec.model))
    for o in ranked:
        logger.info("baseline %s: MAPE %.2f RMSE %.2f", o.spec.model, o.metrics.mape, o.metrics.rmse)
    return ranked


def run_grid(
    table: FeatureTable,
    cache: EncodedCache,
    configs: Mapping[str, RegressorConfig],
    sources: Sequence[str] = GRID_SOURCES,
    units: Sequence[int] = UNITS,
    activations: Sequence[str] = ACTIVATIONS,
    seed: int = 0,
    k: int = N_FOLDS,
    n_jobs: int = 1,
) -> list[ScenarioOutcome]:
    """
    Evaluate every fused scenario of every model under k-fold CV.

    Parameters
    ----------
    table : FeatureTable
        Baseline features of the matched incidents, with row ids.
    cache : EncodedCache
        Encoded vectors for every (source, units, activation) requested.
    configs : mapping of str to RegressorConfig
        Models to run, keyed by kind.
    seed : int
        Master seed for fold plans and per-cell model seeds.
    n_jobs : int
        Worker processes; results do not depend on it.

    Returns
    -------
    list of ScenarioOutcome
        Per model (in ``configs`` order): the baseline outcome, then every
        fused outcome ascending by MAPE. Cells whose encoded vectors are
        missing are logged and skipped.

    Notes
    -----
    All cells of a model share one fold plan, so comparisons between
    scenarios are paired.
    """
    if not isinstance(cache, EncodedCache):
        raise TypeError("cache must be an EncodedCache")
    plan = make_folds(table.n_rows, k, seed)
    models = list(configs)
    specs, jobs = [], []
    for model in models:
        specs.append(ScenarioSpec(BASELINE_SOURCE, None, None, model, configs[model].seed))
    for spec in grid_specs(models, sources, units, activations, seed):
        key = (spec.source, spec.units, spec.activation)
        if key not in cache:
            logger.error("no encoded vectors for %s/%s/%s; skipping %s cell", *key, spec.model)
            continue
        specs.append(spec)
    logger.info("running %d grid cell(s) with %d-fold CV on %d worker(s)", len(specs), k, n_jobs)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_run_cell)(
            spec,
            table,
            None if spec.is_baseline else cache.get(spec.source, spec.units, spec.activation),
            configs[spec.model],
            plan,
        )
        for spec in specs
    )

    ordered = []
    for model in models:
        mine = [o for o in results if o.spec.model == model]
        ordered.extend(o for o in mine if o.spec.is_baseline)
        ordered.extend(sorted((o for o in mine if not o.spec.is_baseline), key=_outcome_key))
    return ordered


def tune_model(
    table: FeatureTable,
    config: RegressorConfig,
    grid: Mapping[str, Sequence],
    plan: FoldPlan,
) -> tuple[RegressorConfig, list[tuple[dict, float]]]:
    """
    Exhaustive k-fold grid search over hyper-parameters.

    Returns
    -------
    tuple
        The configuration with the lowest mean MAPE (first one on ties) and
        the ``(params, mape)`` trail in enumeration order.
    """
    if config.kind not in KINDS:
        raise ConfigurationError(f"unknown model kind '{config.kind}'")
    keys = sorted(grid)
    trail = []
    best, best_mape = config, np.inf
    for values in itertools.product(*(grid[key] for key in keys)):
        params = dict(zip(keys, values))
        candidate = config.with_params(**params)
        metrics, _ = cross_validate(table, candidate, plan)
        trail.append((params, metrics.mape))
        logger.debug("tune %s %s: MAPE %.3f", config.kind, params, metrics.mape)
        if metrics.mape < best_mape:
            best, best_mape = candidate, metrics.mape
    return best, trail
