"""Character-level LSTM-ANN severity encoder for incident descriptions."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from os import PathLike
from typing import Sequence, Union

import numpy as np

from ..errors import ConfigurationError, InsufficientDataError
from ..ingest import IncidentRecord
from ..nn import (
    DenseLayer,
    LstmLayer,
    OptimizerState,
    clip_by_global_norm,
    dense_backward,
    dense_forward,
    load_model,
    loss_mse,
    loss_softmax_ce,
    lstm_backward,
    lstm_forward,
    optimizer_step,
    save_model,
)
from .base import SENTIMENT_SOURCES, EncodedVector, EncoderConfig, TrainingReport
from .text import BITS, batch_to_binary

logger = logging.getLogger(__name__)

HIDDEN_SIZE = 80
N_CLASSES = 5
MIN_RECORDS = 50
DEFAULT_LEARNING_RATE = 5e-3
SPLIT = (0.7, 0.2, 0.1)
_EVAL_BATCH = 256


@dataclass
class SentimentEncoder:
    """
    LSTM(7 -> 80) -> bottleneck(80 -> units) -> head.

    The MSE head maps the bottleneck to one severity value; the CE head maps
    it to five logits, classes 1-4 occupying slots 1-4.
    """

    config: EncoderConfig
    lstm: LstmLayer
    bottleneck: DenseLayer
    head: DenseLayer

    @classmethod
    def initialize(cls, config: EncoderConfig, rng: np.random.Generator) -> "SentimentEncoder":
        lstm = LstmLayer.initialize(BITS, HIDDEN_SIZE, rng)
        bottleneck = DenseLayer.initialize(HIDDEN_SIZE, config.units, config.activation, rng)
        head_width = 1 if config.head == "mse" else N_CLASSES
        head = DenseLayer.initialize(config.units, head_width, "identity", rng)
        return cls(config, lstm, bottleneck, head)

    @property
    def source(self) -> str:
        return SENTIMENT_SOURCES[self.config.head]

    def parameters(self) -> dict[str, np.ndarray]:
        params = self.lstm.parameters("lstm.")
        params.update(self.bottleneck.parameters("bottleneck."))
        params.update(self.head.parameters("head."))
        return params

    def _forward(self, x: np.ndarray):
        h, lstm_cache = lstm_forward(self.lstm, x)
        code, code_cache = dense_forward(self.bottleneck, h)
        out, head_cache = dense_forward(self.head, code)
        return out, (lstm_cache, code_cache, head_cache)

    def _backward(self, caches, grad_out) -> dict[str, np.ndarray]:
        lstm_cache, code_cache, head_cache = caches
        d_code, g_head = dense_backward(self.head, head_cache, grad_out)
        d_h, g_code = dense_backward(self.bottleneck, code_cache, d_code)
        g_lstm = lstm_backward(self.lstm, lstm_cache, d_h)
        grads = {f"lstm.{k}": v for k, v in g_lstm.items()}
        grads.update({f"bottleneck.{k}": v for k, v in g_code.items()})
        grads.update({f"head.{k}": v for k, v in g_head.items()})
        return grads

    def encode_matrix(self, x: np.ndarray) -> np.ndarray:
        """Bottleneck activations for a (batch, 200, 7) input; the head is not applied."""
        chunks = []
        for lo in range(0, len(x), _EVAL_BATCH):
            h, _ = lstm_forward(self.lstm, x[lo : lo + _EVAL_BATCH])
            code, _ = dense_forward(self.bottleneck, h)
            chunks.append(code)
        return np.vstack(chunks) if chunks else np.zeros((0, self.config.units))

    def encode(self, descriptions: Sequence[str]) -> np.ndarray:
        return self.encode_matrix(batch_to_binary(descriptions))

    def predict(self, descriptions: Sequence[str]) -> np.ndarray:
        """Head output: severity estimates (MSE) or class logits (CE)."""
        out, _ = self._forward(batch_to_binary(descriptions))
        return out[:, 0] if self.config.head == "mse" else out

    def save(self, path: Union[str, PathLike], normalization: dict | None = None) -> None:
        meta = {"kind": "sentiment", "config": self.config.to_dict()}
        if normalization is not None:
            meta["normalization"] = dict(normalization)
        save_model(path, [("lstm", self.lstm), ("bottleneck", self.bottleneck), ("head", self.head)], meta)

    @classmethod
    def load(cls, path: Union[str, PathLike]) -> "SentimentEncoder":
        layers, meta = load_model(path)
        if meta.get("kind") != "sentiment":
            raise ConfigurationError(f"{path} does not hold a sentiment encoder")
        return cls(EncoderConfig(**meta["config"]), layers["lstm"], layers["bottleneck"], layers["head"])


def split_indices(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded 70:20:10 train/validation/test split of ``range(n)``."""
    order = rng.permutation(n)
    n_train = int(SPLIT[0] * n)
    n_val = int(SPLIT[1] * n)
    return order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]


def _targets(severities: np.ndarray, head: str) -> np.ndarray:
    if head == "mse":
        return severities.astype(np.float64)[:, None]
    return np.eye(N_CLASSES)[severities.astype(int)]


def _loss(out: np.ndarray, target: np.ndarray, head: str):
    return loss_mse(out, target) if head == "mse" else loss_softmax_ce(out, target)


def _evaluate(encoder: SentimentEncoder, x: np.ndarray, y: np.ndarray) -> float:
    if len(x) == 0:
        return float("nan")
    total = 0.0
    for lo in range(0, len(x), _EVAL_BATCH):
        out, _ = encoder._forward(x[lo : lo + _EVAL_BATCH])
        value, _ = _loss(out, y[lo : lo + _EVAL_BATCH], encoder.config.head)
        total += value * len(out)
    return total / len(x)


def train_sentiment_encoder(
    records: Sequence[IncidentRecord], config: EncoderConfig
) -> tuple[SentimentEncoder, TrainingReport]:
    """
    Train the description encoder end to end to predict severity.

    Parameters
    ----------
    records : sequence of IncidentRecord
        The full incident corpus; at least 50 records.
    config : EncoderConfig
        Bottleneck units/activation, loss head, epochs, batch size and seed.

    Returns
    -------
    tuple of (SentimentEncoder, TrainingReport)
        The report has one train/validation loss pair per epoch and the
        test loss of the final model.

    Raises
    ------
    InsufficientDataError
        With fewer than 50 records.

    Notes
    -----
    Records are split 70:20:10 by a seeded shuffle and trained with Adam on
    mini-batches reshuffled every epoch, gradients clipped to a global norm
    of ``config.clip_norm``. The MSE head bias starts at the mean training
    severity.
    """
    if not isinstance(config, EncoderConfig):
        raise TypeError("config must be an EncoderConfig")
    if len(records) < MIN_RECORDS:
        raise InsufficientDataError(
            f"sentiment encoder needs at least {MIN_RECORDS} records, got {len(records)}"
        )

    seeds = np.random.SeedSequence(config.seed).spawn(2)
    init_rng, data_rng = np.random.default_rng(seeds[0]), np.random.default_rng(seeds[1])

    x = batch_to_binary([r.description for r in records])
    y = _targets(np.array([r.severity for r in records]), config.head)
    train_idx, val_idx, test_idx = split_indices(len(records), data_rng)

    encoder = SentimentEncoder.initialize(config, init_rng)
    if config.head == "mse":
        encoder.head.bias[:] = y[train_idx].mean()
    params = encoder.parameters()
    state = OptimizerState("adam", config.learning_rate or DEFAULT_LEARNING_RATE)
    report = TrainingReport()

    for epoch in range(config.epochs):
        order = data_rng.permutation(train_idx)
        running = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            out, caches = encoder._forward(x[batch])
            value, grad = _loss(out, y[batch], config.head)
            grads = encoder._backward(caches, grad)
            clip_by_global_norm(grads, config.clip_norm)
            optimizer_step(state, params, grads)
            running += value * len(batch)
        report.train_loss.append(running / max(1, len(order)))
        report.validation_loss.append(_evaluate(encoder, x[val_idx], y[val_idx]))
        logger.info(
            "sentiment %s/%s epoch %d: train %.4f val %.4f",
            config.label, config.head, epoch + 1, report.train_loss[-1], report.validation_loss[-1],
        )

    report.test_loss = _evaluate(encoder, x[test_idx], y[test_idx])
    return encoder, report


def sentiment_encode(
    encoder: SentimentEncoder, description: str, incident_id: str = ""
) -> EncodedVector:
    """Encoded representation of one description (bottleneck output)."""
    values = encoder.encode([description])[0]
    return EncodedVector(incident_id, encoder.source, values, encoder.config)
