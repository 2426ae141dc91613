"""Outcome tables: the top-N text report, outcome CSVs, ranking and parallel categories."""
from __future__ import annotations

import logging
from os import PathLike
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

from .errors import InsufficientDataError, MissingArtifactError
from .evaluation import BASELINE_SOURCE, ScenarioOutcome, ScenarioSpec
from .metrics import METRICS, MetricSet

logger = logging.getLogger(__name__)

OUTCOME_COLUMNS = ["model", "source", "units", "activation", *METRICS]
TOP_N = 8
BANDS = ("Q1", "Q2", "Q3", "Q4")
_HEADER = ("AdditionData", "units", "activation", "MAPE", "RMSE")


def _cells(outcome: ScenarioOutcome) -> tuple[str, ...]:
    spec = outcome.spec
    return (
        spec.source,
        "" if spec.units is None else str(spec.units),
        spec.activation or "",
        f"{outcome.metrics.mape:.2f}",
        f"{outcome.metrics.rmse:.2f}",
    )


def format_top_table(
    outcomes: Sequence[ScenarioOutcome], baseline: ScenarioOutcome | None = None, n: int = TOP_N
) -> str:
    """
    Render the best ``n`` fused outcomes under the baseline row.

    Parameters
    ----------
    outcomes : sequence of ScenarioOutcome
        Fused outcomes of one model; baseline rows among them are ignored.
    baseline : ScenarioOutcome, optional
        Printed first with empty ``units`` and ``activation`` cells.
    n : int, default 8

    Returns
    -------
    str
        Pipe-separated table with the header
        ``AdditionData | units | activation | MAPE | RMSE``.

    Examples
    --------
    >>> spec = ScenarioSpec("baseline", None, None, "gbdt")
    >>> base = ScenarioOutcome(spec, MetricSet(44.99, 58.4, 30.0, 40.0))
    >>> print(format_top_table([], base))
    AdditionData | units | activation | MAPE  | RMSE
    baseline     |       |            | 44.99 | 58.40
    """
    if n < 1:
        raise ValueError("n must be positive")
    fused = sorted(
        (o for o in outcomes if not o.spec.is_baseline),
        key=lambda o: (o.metrics.mape, o.spec.source, o.spec.units or 0, o.spec.activation or ""),
    )[:n]
    rows = [_HEADER]
    if baseline is not None:
        rows.append(_cells(baseline))
    rows.extend(_cells(o) for o in fused)
    widths = [max(len(row[i]) for row in rows) for i in range(len(_HEADER))]
    lines = [" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines)


def outcomes_to_frame(outcomes: Sequence[ScenarioOutcome]) -> pd.DataFrame:
    """One row per outcome; fold columns follow the metric columns."""
    frame = pd.DataFrame([o.row() for o in outcomes])
    if frame.empty:
        return pd.DataFrame(columns=OUTCOME_COLUMNS)
    folds = sorted((c for c in frame.columns if c.startswith("fold")), key=lambda c: int(c[4:-5]))
    frame = frame.reindex(columns=OUTCOME_COLUMNS + folds)
    frame["units"] = frame["units"].astype("Int64")
    return frame


def write_outcomes(outcomes: Sequence[ScenarioOutcome], path: Union[str, PathLike]) -> pd.DataFrame:
    """
    Write ``model,source,units,activation,mape,rmse,mae,smape,fold0_mape..``.

    Baseline rows leave ``units`` and ``activation`` empty.
    """
    frame = outcomes_to_frame(outcomes)
    frame.to_csv(path, index=False, float_format="%.10g")
    return frame


def read_outcomes(path: Union[str, PathLike], artifact_hint: str = "incident-fusion run-grid") -> list[ScenarioOutcome]:
    """
    Load an outcomes CSV back into :class:`ScenarioOutcome` objects.

    Only fold MAPEs are stored, so the per-fold metric sets are not
    rebuilt; ``per_fold`` comes back empty.
    """
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(str(path), artifact_hint)
    frame = pd.read_csv(path, dtype={"model": str, "source": str, "activation": str}, keep_default_na=False)
    outcomes = []
    for row in frame.to_dict("records"):
        units = None if row["units"] in ("", None) else int(row["units"])
        activation = row["activation"] or None
        spec = ScenarioSpec(row["source"], units, activation, row["model"])
        metrics = MetricSet(*(float(row[m]) for m in METRICS))
        outcomes.append(ScenarioOutcome(spec, metrics))
    return outcomes


def write_ranking(
    ranked: Sequence[ScenarioOutcome],
    csv_path: Union[str, PathLike],
    svg_path: Union[str, PathLike] | None = None,
) -> pd.DataFrame:
    """Baseline ranking as ``rank,model,mape,rmse,mae,smape`` plus a MAPE bar chart."""
    frame = pd.DataFrame(
        [{"rank": i + 1, "model": o.spec.model, **o.metrics.to_dict()} for i, o in enumerate(ranked)],
        columns=["rank", "model", *METRICS],
    )
    frame.to_csv(csv_path, index=False, float_format="%.10g")
    if svg_path is not None:
        from .plotting import bar_chart

        finite = frame[np.isfinite(frame["mape"])]
        bar_chart(finite["model"].tolist(), finite["mape"].tolist(), svg_path,
                  title="baseline features, 10-fold MAPE")
    return frame


def read_ranking(path: Union[str, PathLike]) -> list[str]:
    """Model kinds in ranked order."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(str(path), "incident-fusion rank-models")
    frame = pd.read_csv(path, dtype={"model": str})
    return frame.sort_values("rank", kind="stable")["model"].tolist()


def parallel_categories(outcomes: Sequence[ScenarioOutcome]) -> pd.DataFrame:
    """
    Parallel-categories view of fused outcomes.

    Each fused outcome gets the MAPE quartile band of its model's grid,
    ``Q1`` being the best quarter. Ties are broken by row order so the four
    bands hold equal counts (up to one).

    Returns
    -------
    pandas.DataFrame
        Columns ``model, source, units, activation, mape, band``.

    Raises
    ------
    InsufficientDataError
        If a model has fewer than four fused outcomes.
    """
    fused = [o for o in outcomes if not o.spec.is_baseline]
    frame = pd.DataFrame(
        {
            "model": [o.spec.model for o in fused],
            "source": [o.spec.source for o in fused],
            "units": [o.spec.units for o in fused],
            "activation": [o.spec.activation for o in fused],
            "mape": [o.metrics.mape for o in fused],
        }
    )
    if frame.empty:
        raise InsufficientDataError("parallel categories need fused outcomes")
    bands = []
    for model, group in frame.groupby("model", sort=False):
        if len(group) < len(BANDS):
            raise InsufficientDataError(f"model {model} has only {len(group)} fused outcome(s)")
        ranks = group["mape"].rank(method="first")
        bands.append(pd.qcut(ranks, len(BANDS), labels=list(BANDS)).astype(str))
    frame["band"] = pd.concat(bands).reindex(frame.index)
    return frame


def write_parallel_categories(outcomes: Sequence[ScenarioOutcome], path: Union[str, PathLike]) -> pd.DataFrame:
    frame = parallel_categories(outcomes)
    frame.to_csv(path, index=False, float_format="%.10g")
    logger.info("wrote %d parallel-category rows to %s", len(frame), path)
    return frame


def baseline_of(outcomes: Sequence[ScenarioOutcome], model: str) -> ScenarioOutcome | None:
    for o in outcomes:
        if o.spec.model == model and o.spec.source == BASELINE_SOURCE:
            return o
    return None
