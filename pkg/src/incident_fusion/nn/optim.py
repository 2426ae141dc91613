"""SGD and Adam updates over named parameter arrays (updated in place)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError


@dataclass
class OptimizerState:
    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer '{self.kind}'")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


def optimizer_step(
    state: OptimizerState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> dict[str, np.ndarray]:
    """
    Apply one update to every parameter that has a gradient.

    Examples
    --------
    >>> p = {"w": np.array([1.0])}
    >>> optimizer_step(OptimizerState("sgd", 0.1), p, {"w": np.array([1.0])})["w"]
    array([0.9])
    """
    state.step += 1
    lr = state.learning_rate
    for name, grad in grads.items():
        param = params[name]
        if grad.shape != param.shape:
            raise DimensionError(f"gradient for '{name}' has shape {grad.shape}, expected {param.shape}")
        if state.kind == "sgd":
            param -= lr * grad
            continue
        m = state.m.setdefault(name, np.zeros_like(param))
        v = state.v.setdefault(name, np.zeros_like(param))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad**2
        m_hat = m / (1.0 - state.beta1**state.step)
        v_hat = v / (1.0 - state.beta2**state.step)
        param -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.sum(g**2)) for g in grads.values())))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total
