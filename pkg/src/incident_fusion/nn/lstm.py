"""Single-layer LSTM with backpropagation through time.

Gates follow the usual recurrence::

    i, f, o = sigmoid(W_* [x_t, h_{t-1}] + b_*)
    g       = tanh(W_g [x_t, h_{t-1}] + b_g)
    c_t     = f * c_{t-1} + i * g
    h_t     = o * tanh(c_t)

with ``h_0 = c_0 = 0``. Inputs are batched as (batch, time, features).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from .activations import sigmoid

GATES = ("i", "f", "o", "g")


@dataclass
class LstmLayer:
    input_size: int
    hidden_size: int
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    def __post_init__(self):
        width = self.input_size + self.hidden_size
        for gate in GATES:
            w = np.asarray(getattr(self, f"W_{gate}"), dtype=np.float64)
            b = np.asarray(getattr(self, f"b_{gate}"), dtype=np.float64)
            if w.shape != (self.hidden_size, width) or b.shape != (self.hidden_size,):
                raise DimensionError(f"gate {gate} has shape {w.shape}/{b.shape}")
            setattr(self, f"W_{gate}", w)
            setattr(self, f"b_{gate}", b)

    @classmethod
    def initialize(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "LstmLayer":
        width = input_size + hidden_size
        scale = 1.0 / np.sqrt(width)
        arrays = {}
        for gate in GATES:
            arrays[f"W_{gate}"] = rng.uniform(-scale, scale, size=(hidden_size, width))
        for gate in GATES:
            arrays[f"b_{gate}"] = np.zeros(hidden_size)
        arrays["b_f"] = np.ones(hidden_size)
        return cls(input_size, hidden_size, **arrays)

    def parameters(self, prefix: str = "") -> dict[str, np.ndarray]:
        params = {f"{prefix}W_{g}": getattr(self, f"W_{g}") for g in GATES}
        params.update({f"{prefix}b_{g}": getattr(self, f"b_{g}") for g in GATES})
        return params

    def _stacked(self) -> tuple[np.ndarray, np.ndarray]:
        W = np.vstack([getattr(self, f"W_{g}") for g in GATES])
        b = np.concatenate([getattr(self, f"b_{g}") for g in GATES])
        return W, b


@dataclass
class LstmCache:
    input_size: int
    hidden_size: int
    batch: int
    xh: list = field(default_factory=list)
    gates: list = field(default_factory=list)
    c_prev: list = field(default_factory=list)
    tanh_c: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.xh)


def lstm_forward(layer: LstmLayer, sequence: np.ndarray) -> tuple[np.ndarray, LstmCache]:
    """
    Run the recurrence over a sequence and return the final hidden state.

    Parameters
    ----------
    layer : LstmLayer
    sequence : np.ndarray
        Shape (time, features) or (batch, time, features).

    Returns
    -------
    tuple of (np.ndarray, LstmCache)
        ``h_T`` with shape (batch, hidden) (or (hidden,) for an unbatched
        input) and the per-step activations for :func:`lstm_backward`.
    """
    x = np.asarray(sequence, dtype=np.float64)
    unbatched = x.ndim == 2
    if unbatched:
        x = x[None]
    if x.ndim != 3 or x.shape[1] == 0:
        raise DimensionError("sequence must be a non-empty (batch, time, features) array")
    if x.shape[2] != layer.input_size:
        raise DimensionError(f"input width {x.shape[2]} != LSTM input size {layer.input_size}")

    batch, steps, _ = x.shape
    H = layer.hidden_size
    W, b = layer._stacked()
    h = np.zeros((batch, H))
    c = np.zeros((batch, H))
    cache = LstmCache(layer.input_size, H, batch)
    for t in range(steps):
        xh = np.concatenate([x[:, t, :], h], axis=1)
        z = xh @ W.T + b
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H : 2 * H])
        o = sigmoid(z[:, 2 * H : 3 * H])
        g = np.tanh(z[:, 3 * H :])
        cache.xh.append(xh)
        cache.c_prev.append(c)
        c = f * c + i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        cache.gates.append((i, f, o, g))
        cache.tanh_c.append(tanh_c)
    return (h[0] if unbatched else h), cache


def lstm_backward(layer: LstmLayer, cache: LstmCache, grad_hT: np.ndarray) -> dict[str, np.ndarray]:
    """
    Exact parameter gradients through the whole unrolled sequence.

    Returns a dict keyed like :meth:`LstmLayer.parameters`.
    """
    if cache.input_size != layer.input_size or cache.hidden_size != layer.hidden_size:
        raise DimensionError("cache was produced by a layer of a different shape")
    if cache.steps == 0:
        raise DimensionError("cache holds no steps")
    H = layer.hidden_size
    dh = np.asarray(grad_hT, dtype=np.float64).reshape(-1, H)
    if dh.shape[0] != cache.batch:
        raise DimensionError(f"gradient batch {dh.shape[0]} != cached batch {cache.batch}")

    W, _ = layer._stacked()
    dW = np.zeros_like(W)
    db = np.zeros(4 * H)
    dc = np.zeros_like(dh)
    for t in reversed(range(cache.steps)):
        i, f, o, g = cache.gates[t]
        tanh_c = cache.tanh_c[t]
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c**2)
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * cache.c_prev[t] * f * (1.0 - f),
                do * o * (1.0 - o),
                dc * i * (1.0 - g**2),
            ],
            axis=1,
        )
        dW += dz.T @ cache.xh[t]
        db += dz.sum(axis=0)
        dh = (dz @ W)[:, layer.input_size :]
        dc = dc * f

    grads = {}
    for k, gate in enumerate(GATES):
        grads[f"W_{gate}"] = dW[k * H : (k + 1) * H]
        grads[f"b_{gate}"] = db[k * H : (k + 1) * H]
    return grads
