"""Run configuration: one TOML file, environment override and CLI flags on top."""
from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from os import PathLike
from pathlib import Path
from typing import Any, Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .encoders import ACTIVATIONS, SENTIMENT_SOURCES, SERIES_SOURCES, UNITS
from .errors import ConfigurationError
from .evaluation import N_FOLDS
from .matching import DEFAULT_RADIUS_M
from .regressors import KINDS, TUNING_GRIDS, RegressorConfig, default_configs

logger = logging.getLogger(__name__)

CONFIG_ENV = "INCIDENT_FUSION_CONFIG"


@dataclass
class PathsConfig:
    incidents: str = "data/incidents.csv"
    stations: str = "data/stations.csv"
    station_metadata: Optional[str] = None
    cache_dir: str = "cache"
    output_dir: str = "output"


@dataclass
class IngestConfig:
    """``baseline_columns=None`` takes every non-required incident column."""

    baseline_columns: Optional[list] = None
    categorical_columns: list = field(default_factory=list)
    tz: str = "UTC"
    synth: Optional[str] = None


@dataclass
class MatchConfig:
    radius_m: float = DEFAULT_RADIUS_M
    max_speed: Union[float, str] = "auto"
    max_flow: Union[float, str] = "auto"
    plots: int = 0


@dataclass
class EncodersConfig:
    units: list = field(default_factory=lambda: list(UNITS))
    activations: list = field(default_factory=lambda: list(ACTIVATIONS))
    sources: Optional[list] = None
    heads: list = field(default_factory=lambda: ["mse"])
    epochs: int = 15
    batch_size: int = 32
    learning_rate: Optional[float] = None


@dataclass
class ModelsConfig:
    """
    ``kinds`` are ranked on the baseline; ``grid`` names the models the
    scenario grid runs (``None`` takes the top three of the ranking).
    ``params`` and ``tuning`` map a kind to hyper-parameter overrides and
    to its search grid.
    """

    kinds: list = field(default_factory=lambda: list(KINDS))
    grid: Optional[list] = None
    params: dict = field(default_factory=dict)
    tuning: dict = field(default_factory=dict)
    tune: bool = False


@dataclass
class EvalConfig:
    folds: int = N_FOLDS
    jobs: int = 1
    top_n: int = 8
    random_dims: int = 100
    random_low: float = 1.0
    random_high: float = 10.0
    random_pairs: int = 10_000
    split_evals: int = 1000
    split_test_fraction: float = 0.1
    split_model: str = "rf"


@dataclass
class ExplainConfig:
    n_components: int = 50
    n_iter: int = 7
    n_samples: int = 1000
    kernel_width: float = 0.75
    alpha: float = 1.0
    top_k: int = 10
    bigrams: bool = True
    incidents: list = field(default_factory=list)
    n_incidents: int = 3


_SECTIONS = {
    "paths": PathsConfig,
    "ingest": IngestConfig,
    "match": MatchConfig,
    "encoders": EncodersConfig,
    "models": ModelsConfig,
    "eval": EvalConfig,
    "explain": ExplainConfig,
}


@dataclass
class RunConfig:
    """
    Everything a command needs, with defaults matching the published setup.

    Examples
    --------
    >>> cfg = RunConfig.from_dict({"seed": 3, "eval": {"folds": 5}})
    >>> cfg.seed, cfg.eval.folds, cfg.encoders.epochs
    (3, 5, 15)
    """

    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    encoders: EncodersConfig = field(default_factory=EncodersConfig)
    models: ModelsConfig = field(default_factory=ModelsConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    explain: ExplainConfig = field(default_factory=ExplainConfig)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Union[str, PathLike, None] = None) -> "RunConfig":
        """Build a config from parsed TOML; unknown sections or keys are errors."""
        if not isinstance(data, dict):
            raise TypeError("data must be a dict")
        unknown = sorted(set(data) - set(_SECTIONS) - {"seed"})
        if unknown:
            raise ConfigurationError(f"unknown config section(s): {unknown}")
        sections = {}
        for name, section_cls in _SECTIONS.items():
            values = data.get(name, {})
            if not isinstance(values, dict):
                raise ConfigurationError(f"[{name}] must be a table")
            allowed = {f.name for f in fields(section_cls)}
            bad = sorted(set(values) - allowed)
            if bad:
                raise ConfigurationError(f"unknown key(s) in [{name}]: {bad}")
            sections[name] = section_cls(**values)
        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")
        cfg = cls(seed=seed, **sections)
        if base_dir is not None:
            cfg.paths = _resolve_paths(cfg.paths, Path(base_dir))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Value checks that do not depend on files existing."""
        bad_units = [u for u in self.encoders.units if u not in UNITS]
        if bad_units or not self.encoders.units:
            raise ConfigurationError(f"encoders.units must be a non-empty subset of {UNITS}")
        bad_acts = [a for a in self.encoders.activations if a not in ACTIVATIONS]
        if bad_acts or not self.encoders.activations:
            raise ConfigurationError(f"encoders.activations must be a non-empty subset of {ACTIVATIONS}")
        if not self.encoders.heads or any(h not in SENTIMENT_SOURCES for h in self.encoders.heads):
            raise ConfigurationError(f"encoders.heads must be a non-empty subset of {tuple(SENTIMENT_SOURCES)}")
        known_sources = set(SERIES_SOURCES) | set(SENTIMENT_SOURCES.values())
        if self.encoders.sources is not None:
            unknown = [s for s in self.encoders.sources if s not in known_sources]
            if unknown:
                raise ConfigurationError(f"unknown encoded source(s): {unknown}")
        for kind in list(self.models.kinds) + list(self.models.grid or []):
            if kind not in KINDS:
                raise ConfigurationError(f"unknown model kind '{kind}'")
        for name, value in (("max_speed", self.match.max_speed), ("max_flow", self.match.max_flow)):
            if value != "auto" and not (isinstance(value, (int, float)) and value > 0):
                raise ConfigurationError(f"match.{name} must be 'auto' or a positive number")
        if self.match.radius_m < 0:
            raise ConfigurationError("match.radius_m must be non-negative")
        if self.eval.folds < 2 or self.eval.jobs == 0:
            raise ConfigurationError("eval.folds must be at least 2 and eval.jobs non-zero")
        self.regressor_configs()

    @property
    def sources(self) -> list[str]:
        """Encoded sources of the grid: the configured list or the six series plus one per head."""
        if self.encoders.sources is not None:
            return list(self.encoders.sources)
        return [SENTIMENT_SOURCES[h] for h in self.encoders.heads] + list(SERIES_SOURCES)

    def regressor_configs(self) -> dict[str, RegressorConfig]:
        """Default hyper-parameters per kind with ``[models.params.<kind>]`` applied."""
        defaults = default_configs(self.seed)
        unknown = sorted(set(self.models.params) - set(KINDS))
        if unknown:
            raise ConfigurationError(f"[models.params] names unknown kind(s): {unknown}")
        return {
            kind: defaults[kind].with_params(**self.models.params.get(kind, {}))
            for kind in KINDS
        }

    def tuning_grid(self, kind: str) -> dict:
        return dict(self.models.tuning.get(kind, TUNING_GRIDS[kind]))

    def override(self, **values: Any) -> "RunConfig":
        """
        Apply flag values such as ``seed=4`` or ``eval.jobs=2``; ``None`` values are skipped.
        """
        cfg = replace(self)
        for dotted, value in values.items():
            if value is None:
                continue
            if "." not in dotted:
                setattr(cfg, dotted, value)
                continue
            section, key = dotted.split(".", 1)
            setattr(cfg, section, replace(getattr(cfg, section), **{key: value}))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def cache_dir(self) -> Path:
        return Path(self.paths.cache_dir)

    @property
    def output_dir(self) -> Path:
        return Path(self.paths.output_dir)


def _resolve_paths(paths: PathsConfig, base: Path) -> PathsConfig:
    def resolve(value):
        if value is None:
            return None
        p = Path(value)
        return str(p if p.is_absolute() else base / p)

    return PathsConfig(**{f.name: resolve(getattr(paths, f.name)) for f in fields(PathsConfig)})


def load_config(path: Union[str, PathLike, None] = None) -> RunConfig:
    """
    Read the run configuration.

    Parameters
    ----------
    path : path-like, optional
        TOML file. Without it the ``INCIDENT_FUSION_CONFIG`` environment
        variable is consulted, and without that every default applies.
        Relative paths inside the file are taken relative to the file.

    Raises
    ------
    ConfigurationError
        If the file is missing, is not valid TOML, or names unknown keys.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        logger.info("no config file given; using defaults")
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid TOML: {exc}") from exc
    logger.info("loaded config %s", path)
    return RunConfig.from_dict(data, base_dir=path.parent)
