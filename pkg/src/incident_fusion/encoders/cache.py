"""Train every encoder variant and keep the encoded features in a CSV cache."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..errors import ConfigurationError, MissingArtifactError
from ..ingest import IncidentRecord
from ..matching import CHANNELS, SOURCE_NAMES, MatchedIncident
from .autoencoder import series_pool, train_autoencoder
from .base import (
    ACTIVATIONS,
    SENTIMENT_SOURCES,
    SERIES_SOURCES,
    UNITS,
    EncoderConfig,
    TrainingReport,
)
from .sentiment import train_sentiment_encoder

logger = logging.getLogger(__name__)

ENCODED_ID_COLUMNS = ["incident_id", "source", "units", "activation"]
MAX_UNITS = max(UNITS)
CacheKey = tuple[str, int, str]


def _value_columns(units: int) -> list[str]:
    return [f"v{i}" for i in range(1, units + 1)]


@dataclass
class EncodedCache:
    """
    Encoded features keyed by ``(source, units, activation)``.

    Each entry is a frame indexed by incident id with columns ``v1..vU``.
    """

    frames: dict[CacheKey, pd.DataFrame] = field(default_factory=dict)

    def __contains__(self, key: CacheKey) -> bool:
        return key in self.frames

    def __len__(self) -> int:
        return len(self.frames)

    def keys(self) -> list[CacheKey]:
        return sorted(self.frames)

    def put(self, source: str, units: int, activation: str, frame: pd.DataFrame) -> None:
        if list(frame.columns) != _value_columns(units):
            raise ConfigurationError(f"encoded frame for {source} must have columns v1..v{units}")
        self.frames[(source, units, activation)] = frame

    def get(self, source: str, units: int, activation: str) -> pd.DataFrame:
        key = (source, units, activation)
        if key not in self.frames:
            raise MissingArtifactError(f"encoded features {source}/{units}/{activation}", "incident-fusion train-encoders")
        return self.frames[key]

    def to_frame(self) -> pd.DataFrame:
        parts = []
        for source, units, activation in self.keys():
            frame = self.frames[(source, units, activation)].reset_index()
            frame.insert(1, "source", source)
            frame.insert(2, "units", units)
            frame.insert(3, "activation", activation)
            parts.append(frame)
        if not parts:
            return pd.DataFrame(columns=ENCODED_ID_COLUMNS + _value_columns(MAX_UNITS))
        out = pd.concat(parts, ignore_index=True)
        return out.reindex(columns=ENCODED_ID_COLUMNS + _value_columns(MAX_UNITS))


def model_file(name: str, units: int, activation: str) -> str:
    """File name of a saved encoder, e.g. ``autoencoder_8_tanh.json`` or ``LSTM-sent_8_tanh.json``."""
    return f"{name}_{units}_{activation}.json"


def _encode_one(
    records: Sequence[IncidentRecord],
    matched: Sequence[MatchedIncident],
    pool: np.ndarray,
    config: EncoderConfig,
    sources: Sequence[str],
    heads: Sequence[str],
    model_dir: Path | None = None,
    normalization: dict | None = None,
) -> tuple[list[tuple[str, pd.DataFrame]], dict[str, TrainingReport]]:
    """Train the encoders of one (units, activation) cell and encode everything."""
    columns = _value_columns(config.units)
    entries, reports = [], {}
    wanted_series = [s for s in sources if s in SERIES_SOURCES]
    if wanted_series and len(pool):
        model, report = train_autoencoder(pool, config)
        reports["autoencoder"] = report
        if model_dir is not None:
            model.save(model_dir / model_file("autoencoder", config.units, config.activation), normalization)
        by_source = {SOURCE_NAMES[ch]: ch for ch in CHANNELS}
        ids = [m.incident.id for m in matched]
        for source in wanted_series:
            block = np.vstack([m.series(by_source[source]).values for m in matched])
            frame = pd.DataFrame(model.encode(block), index=pd.Index(ids, name="incident_id"), columns=columns)
            entries.append((source, frame))
    for head in heads:
        source = SENTIMENT_SOURCES[head]
        if source not in sources:
            continue
        head_config = EncoderConfig(**{**config.to_dict(), "head": head})
        encoder, report = train_sentiment_encoder(records, head_config)
        reports[source] = report
        if model_dir is not None:
            encoder.save(model_dir / model_file(source, config.units, config.activation), normalization)
        ids = [r.id for r in records]
        codes = encoder.encode([r.description for r in records])
        entries.append((source, pd.DataFrame(codes, index=pd.Index(ids, name="incident_id"), columns=columns)))
    return entries, reports


def encode_all(
    records: Sequence[IncidentRecord],
    matched: Sequence[MatchedIncident],
    units: Iterable[int] = UNITS,
    activations: Iterable[str] = ACTIVATIONS,
    sources: Sequence[str] | None = None,
    heads: Sequence[str] = ("mse",),
    epochs: int = 15,
    batch_size: int = 32,
    learning_rate: float | None = None,
    seed: int = 0,
    n_jobs: int = 1,
    model_dir: Union[str, PathLike, None] = None,
    normalization: dict | None = None,
) -> tuple[EncodedCache, dict[tuple[str, int, str], TrainingReport]]:
    """
    Train one autoencoder and one sentiment encoder per (units, activation)
    and encode every incident with them.

    Parameters
    ----------
    records : sequence of IncidentRecord
        Full corpus; every record gets a sentiment encoding.
    matched : sequence of MatchedIncident
        Matched incidents; their six channels form the autoencoder pool and
        each channel is encoded separately.
    units, activations : iterable
        Bottleneck grid.
    sources : sequence of str, optional
        Sources to produce; defaults to the six series sources plus one
        sentiment source per head.
    heads : sequence of {"mse", "ce"}, default ("mse",)
        Sentiment heads to train.
    n_jobs : int, default 1
        Worker processes for independent encoder cells.
    model_dir : path, optional
        When given, every trained encoder is written there as
        ``<model>_<units>_<activation>.json`` (see :func:`model_file`).
    normalization : dict, optional
        ``max_speed`` and ``max_flow`` the series were scaled by; stored in
        the metadata of every written model.

    Returns
    -------
    tuple of (EncodedCache, dict)
        The cache and the training reports keyed by
        ``(model, units, activation)`` where ``model`` is ``"autoencoder"``
        or a sentiment source tag.

    Notes
    -----
    Every cell trains with ``seed`` itself, so results do not depend on
    ``n_jobs`` or on the order in which cells finish.
    """
    heads = tuple(heads)
    if not heads or any(h not in SENTIMENT_SOURCES for h in heads):
        raise ConfigurationError(f"heads must be a non-empty subset of {tuple(SENTIMENT_SOURCES)}")
    if sources is None:
        sources = list(SERIES_SOURCES) + [SENTIMENT_SOURCES[h] for h in heads]
    known = set(SERIES_SOURCES) | set(SENTIMENT_SOURCES.values())
    unknown = [s for s in sources if s not in known]
    if unknown:
        raise ConfigurationError(f"unknown encoded source(s): {unknown}")

    cells = [
        EncoderConfig(
            units=u, activation=a, epochs=epochs, seed=seed,
            batch_size=batch_size, learning_rate=learning_rate,
        )
        for u in units
        for a in activations
    ]
    if model_dir is not None:
        model_dir = Path(model_dir)
        model_dir.mkdir(parents=True, exist_ok=True)
    pool = series_pool(matched)
    logger.info("training encoders for %d cell(s) on %d worker(s)", len(cells), n_jobs)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_encode_one)(records, matched, pool, cfg, sources, heads, model_dir, normalization) for cfg in cells
    )

    cache = EncodedCache()
    reports = {}
    for cfg, (entries, cell_reports) in zip(cells, results):
        for source, frame in entries:
            cache.put(source, cfg.units, cfg.activation, frame)
        for name, report in cell_reports.items():
            reports[(name, cfg.units, cfg.activation)] = report
    return cache, reports


def write_encoded(cache: EncodedCache, path: Union[str, PathLike]) -> None:
    """Write the cache as ``incident_id,source,units,activation,v1..v16``; unused slots stay empty."""
    cache.to_frame().to_csv(path, index=False, float_format="%.10g")


def read_encoded(path: Union[str, PathLike]) -> EncodedCache:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(str(path), "incident-fusion train-encoders")
    frame = pd.read_csv(path, dtype={"incident_id": str, "source": str, "activation": str})
    cache = EncodedCache()
    for (source, units, activation), group in frame.groupby(["source", "units", "activation"], sort=True):
        columns = _value_columns(int(units))
        block = group.set_index("incident_id")[columns].astype(np.float64)
        cache.put(source, int(units), activation, block)
    return cache


def write_training_reports(
    reports: dict[tuple[str, int, str], TrainingReport], directory: Union[str, PathLike]
) -> list[Path]:
    """One loss CSV and one SVG loss curve per trained encoder."""
    from ..plotting import loss_curves

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for (name, units, activation), report in sorted(reports.items()):
        stem = directory / f"loss_{name}_{units}_{activation}"
        report.to_csv(stem.with_suffix(".csv"))
        loss_curves(report.train_loss, report.validation_loss, stem.with_suffix(".svg"),
                    title=f"{name} {units} {activation}")
        written.append(stem.with_suffix(".csv"))
    return written
