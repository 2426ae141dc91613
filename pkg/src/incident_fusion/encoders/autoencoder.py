"""Hourglass ANN autoencoder for normalised 288-slot traffic series."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from os import PathLike
from typing import Sequence, Union

import numpy as np

from ..errors import ConfigurationError, DimensionError, InsufficientDataError
from ..ingest import SLOTS_PER_DAY
from ..matching import CHANNELS, DaySeries288, MatchedIncident
from ..nn import (
    DenseLayer,
    OptimizerState,
    clip_by_global_norm,
    dense_backward,
    dense_forward,
    load_model,
    loss_mse,
    optimizer_step,
    save_model,
)
from .base import SERIES_SOURCES, EncodedVector, EncoderConfig, TrainingReport

logger = logging.getLogger(__name__)

HIDDEN_WIDTH = 64
DEFAULT_LEARNING_RATE = 3e-3
VALIDATION_FRACTION = 0.1
_LAYERS = ("enc1", "bottleneck", "dec1", "out")


@dataclass
class SeriesAutoencoder:
    """288 -> 64 (relu) -> units (config activation) -> 64 (relu) -> 288."""

    config: EncoderConfig
    enc1: DenseLayer
    bottleneck: DenseLayer
    dec1: DenseLayer
    out: DenseLayer

    @classmethod
    def initialize(cls, config: EncoderConfig, rng: np.random.Generator) -> "SeriesAutoencoder":
        return cls(
            config,
            DenseLayer.initialize(SLOTS_PER_DAY, HIDDEN_WIDTH, "relu", rng),
            DenseLayer.initialize(HIDDEN_WIDTH, config.units, config.activation, rng),
            DenseLayer.initialize(config.units, HIDDEN_WIDTH, "relu", rng),
            DenseLayer.initialize(HIDDEN_WIDTH, SLOTS_PER_DAY, "identity", rng),
        )

    def layers(self) -> list[tuple[str, DenseLayer]]:
        return [(name, getattr(self, name)) for name in _LAYERS]

    def parameters(self) -> dict[str, np.ndarray]:
        params = {}
        for name, layer in self.layers():
            params.update(layer.parameters(f"{name}."))
        return params

    def _forward(self, x: np.ndarray):
        caches = []
        for _, layer in self.layers():
            x, cache = dense_forward(layer, x)
            caches.append(cache)
        return x, caches

    def _backward(self, caches, grad_out) -> dict[str, np.ndarray]:
        grads = {}
        for (name, layer), cache in zip(reversed(self.layers()), reversed(caches)):
            grad_out, g = dense_backward(layer, cache, grad_out)
            grads.update({f"{name}.{k}": v for k, v in g.items()})
        return grads

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Bottleneck activations of a (batch, 288) matrix."""
        hidden, _ = dense_forward(self.enc1, x)
        code, _ = dense_forward(self.bottleneck, hidden)
        return code

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        out, _ = self._forward(x)
        return out

    def save(self, path: Union[str, PathLike], normalization: dict | None = None) -> None:
        """Write the layers with the config and the ``max_speed``/``max_flow`` the inputs were scaled by."""
        meta = {"kind": "autoencoder", "config": self.config.to_dict()}
        if normalization is not None:
            meta["normalization"] = dict(normalization)
        save_model(path, self.layers(), meta)

    @classmethod
    def load(cls, path: Union[str, PathLike]) -> "SeriesAutoencoder":
        layers, meta = load_model(path)
        if meta.get("kind") != "autoencoder":
            raise ConfigurationError(f"{path} does not hold a series autoencoder")
        return cls(EncoderConfig(**meta["config"]), *(layers[name] for name in _LAYERS))


def series_pool(matched: Sequence[MatchedIncident]) -> np.ndarray:
    """Stack every channel of every matched incident into one (6n, 288) pool."""
    if not matched:
        return np.zeros((0, SLOTS_PER_DAY))
    return np.vstack([m.series(ch).values for m in matched for ch in CHANNELS])


def train_autoencoder(
    pool: np.ndarray, config: EncoderConfig
) -> tuple[SeriesAutoencoder, TrainingReport]:
    """
    Fit the autoencoder to reconstruct the pooled series.

    Parameters
    ----------
    pool : numpy.ndarray
        Normalised series, one per row, 288 columns (see :func:`series_pool`).
    config : EncoderConfig
        Bottleneck units and activation, epochs, batch size and seed.

    Returns
    -------
    tuple of (SeriesAutoencoder, TrainingReport)
        One reconstruction-MSE entry per epoch; a seeded tenth of the pool is
        held out for the validation loss when the pool has ten rows or more.

    Raises
    ------
    InsufficientDataError
        If the pool is empty.
    DimensionError
        If rows are not 288 wide.
    """
    if not isinstance(config, EncoderConfig):
        raise TypeError("config must be an EncoderConfig")
    pool = np.asarray(pool, dtype=np.float64)
    if pool.size == 0:
        raise InsufficientDataError("autoencoder training pool is empty")
    if pool.ndim != 2 or pool.shape[1] != SLOTS_PER_DAY:
        raise DimensionError(f"pool rows must hold {SLOTS_PER_DAY} values, got shape {pool.shape}")

    seeds = np.random.SeedSequence(config.seed).spawn(2)
    init_rng, data_rng = np.random.default_rng(seeds[0]), np.random.default_rng(seeds[1])
    order = data_rng.permutation(len(pool))
    n_val = int(VALIDATION_FRACTION * len(pool)) if len(pool) >= 10 else 0
    val_idx, train_idx = order[:n_val], order[n_val:]

    model = SeriesAutoencoder.initialize(config, init_rng)
    model.out.bias[:] = pool[train_idx].mean(axis=0)
    params = model.parameters()
    state = OptimizerState("adam", config.learning_rate or DEFAULT_LEARNING_RATE)
    report = TrainingReport()

    for epoch in range(config.epochs):
        batches = data_rng.permutation(train_idx)
        running = 0.0
        for lo in range(0, len(batches), config.batch_size):
            x = pool[batches[lo : lo + config.batch_size]]
            recon, caches = model._forward(x)
            value, grad = loss_mse(recon, x)
            grads = model._backward(caches, grad)
            clip_by_global_norm(grads, config.clip_norm)
            optimizer_step(state, params, grads)
            running += value * len(x)
        report.train_loss.append(running / len(train_idx))
        if n_val:
            report.validation_loss.append(loss_mse(model.reconstruct(pool[val_idx]), pool[val_idx])[0])
        logger.info("autoencoder %s epoch %d: loss %.6f", config.label, epoch + 1, report.train_loss[-1])

    return model, report


def autoencode(
    model: SeriesAutoencoder,
    series: Union[DaySeries288, np.ndarray],
    source: str,
    incident_id: str = "",
) -> EncodedVector:
    """
    Bottleneck features of one normalised day series.

    Examples
    --------
    >>> vec = autoencode(model, matched.flow7, "Flow7")  # doctest: +SKIP
    >>> vec.values.shape
    (8,)
    """
    if source not in SERIES_SOURCES:
        raise ValueError(f"source must be one of {SERIES_SOURCES}, got '{source}'")
    values = series.values if isinstance(series, DaySeries288) else np.asarray(series, dtype=np.float64)
    if values.shape != (SLOTS_PER_DAY,):
        raise DimensionError(f"series must hold {SLOTS_PER_DAY} values, got {values.shape}")
    return EncodedVector(incident_id, source, model.encode(values[None, :])[0], model.config)
