"""Fully connected layer: forward pass and exact gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from .activations import ACTIVATIONS, activate, activate_grad


@dataclass
class DenseLayer:
    """``activation(x @ weights.T + bias)`` with weights of shape (out, in)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise DimensionError(
                f"bias shape {self.bias.shape} does not fit weights {self.weights.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation '{self.activation}'")

    @classmethod
    def initialize(cls, n_in: int, n_out: int, activation: str, rng: np.random.Generator) -> "DenseLayer":
        scale = 1.0 / np.sqrt(n_in)
        return cls(
            rng.uniform(-scale, scale, size=(n_out, n_in)),
            rng.uniform(-scale, scale, size=n_out),
            activation,
        )

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def parameters(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {f"{prefix}weights": self.weights, f"{prefix}bias": self.bias}


def dense_forward(layer: DenseLayer, inputs: np.ndarray) -> tuple[np.ndarray, tuple]:
    """
    Forward pass for a batch.

    Returns
    -------
    tuple
        ``(outputs, cache)``; the cache feeds :func:`dense_backward`.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != layer.n_in:
        raise DimensionError(f"input width {x.shape[1]} != layer input {layer.n_in}")
    z = x @ layer.weights.T + layer.bias
    return activate(z, layer.activation), (x, z)


def dense_backward(
    layer: DenseLayer, cache: tuple, grad_out: np.ndarray
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Gradients of a scalar loss w.r.t. the layer input and parameters."""
    x, z = cache
    grad_out = np.asarray(grad_out, dtype=np.float64).reshape(z.shape)
    dz = grad_out * activate_grad(z, layer.activation)
    grads = {"weights": dz.T @ x, "bias": dz.sum(axis=0)}
    return dz @ layer.weights, grads
