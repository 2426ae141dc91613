"""Shared encoder types: configuration, encoded vectors and training reports."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from os import PathLike
from typing import Union

import numpy as np
import pandas as pd

from ..errors import ConfigurationError, DimensionError

UNITS = (2, 4, 8, 12, 16)
ACTIVATIONS = ("relu", "elu", "tanh", "sigmoid")
HEADS = ("mse", "ce")
SERIES_SOURCES = ("Speed", "Flow", "Speed7", "Flow7", "SD", "FD")
SENTIMENT_SOURCES = {"mse": "LSTM-sent", "ce": "LSTM-sentCE"}


@dataclass(frozen=True)
class EncoderConfig:
    """
    Bottleneck width and activation of one encoder variant.

    ``head`` only matters for the sentiment encoder. ``learning_rate=None``
    lets each encoder use its own default.
    """

    units: int = 12
    activation: str = "relu"
    head: str = "mse"
    epochs: int = 15
    seed: int = 0
    batch_size: int = 32
    learning_rate: float | None = None
    clip_norm: float = 5.0

    def __post_init__(self):
        if self.units not in UNITS:
            raise ConfigurationError(f"units must be one of {UNITS}, got {self.units}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {ACTIVATIONS}, got '{self.activation}'")
        if self.head not in HEADS:
            raise ConfigurationError(f"head must be one of {HEADS}, got '{self.head}'")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def label(self) -> str:
        return f"{self.units}-{self.activation}"


# closed ranges; float64 sigmoid and tanh saturate to their bounds exactly
_CODOMAIN = {
    "sigmoid": (0.0, 1.0),
    "tanh": (-1.0, 1.0),
    "relu": (0.0, np.inf),
    "elu": (-1.0, np.inf),
}


@dataclass(frozen=True)
class EncodedVector:
    incident_id: str
    source: str
    values: np.ndarray
    config: EncoderConfig

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.config.units,):
            raise DimensionError(f"encoded vector has {values.size} values, expected {self.config.units}")
        object.__setattr__(self, "values", values)

    def in_codomain(self) -> bool:
        lo, hi = _CODOMAIN[self.config.activation]
        v = self.values
        return bool(np.all(np.isfinite(v)) and np.all(v >= lo) and np.all(v <= hi))


@dataclass
class TrainingReport:
    """Per-epoch losses of one training run (plus held-out test loss if any)."""

    train_loss: list[float] = field(default_factory=list)
    validation_loss: list[float] = field(default_factory=list)
    test_loss: float | None = None

    def __len__(self) -> int:
        return len(self.train_loss)

    def to_frame(self) -> pd.DataFrame:
        n = len(self.train_loss)
        val = self.validation_loss if self.validation_loss else [np.nan] * n
        return pd.DataFrame({"epoch": np.arange(1, n + 1), "train_loss": self.train_loss, "val_loss": val})

    def to_csv(self, path: Union[str, PathLike]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.10g")
