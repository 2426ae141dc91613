"""Central finite-difference gradient checking."""
from typing import Callable

import numpy as np


def numeric_gradient(loss: Callable[[], float], param: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss()`` w.r.t. every entry of ``param`` (perturbed in place)."""
    grad = np.zeros_like(param)
    flat, gflat = param.reshape(-1), grad.reshape(-1)
    for k in range(flat.size):
        saved = flat[k]
        flat[k] = saved + h
        up = loss()
        flat[k] = saved - h
        down = loss()
        flat[k] = saved
        gflat[k] = (up - down) / (2 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def gradient_check(
    loss: Callable[[], float],
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    h: float = 1e-5,
) -> float:
    """Largest relative error between analytic and numeric gradients over all parameters."""
    worst = 0.0
    for name, grad in grads.items():
        worst = max(worst, max_relative_error(grad, numeric_gradient(loss, params[name], h)))
    return worst


def check_layers(n_seeds: int = 20, h: float = 1e-5) -> dict[str, float]:
    """
    Worst relative gradient error per network piece over ``n_seeds`` random draws.

    Covers a dense layer for every activation, a three-step LSTM and both
    losses. Used by the ``check-gradients`` command.
    """
    from .activations import ACTIVATIONS
    from .dense import DenseLayer, dense_backward, dense_forward
    from .losses import loss_mse, loss_softmax_ce
    from .lstm import LstmLayer, lstm_backward, lstm_forward

    worst: dict[str, float] = {}

    def record(name: str, err: float) -> None:
        worst[name] = max(worst.get(name, 0.0), err)

    for seed in range(n_seeds):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(4, 5))
        target = rng.normal(size=(4, 3))
        for act in ACTIVATIONS:
            layer = DenseLayer.initialize(5, 3, act, rng)

            def dense_loss():
                return loss_mse(dense_forward(layer, x)[0], target)[0]

            out, cache = dense_forward(layer, x)
            _, grads = dense_backward(layer, cache, loss_mse(out, target)[1])
            record(f"dense-{act}", gradient_check(dense_loss, layer.parameters(), grads, h))

        lstm = LstmLayer.initialize(4, 3, rng)
        seq = rng.normal(size=(2, 3, 4))
        lstm_target = rng.normal(size=(2, 3))

        def lstm_loss():
            return loss_mse(lstm_forward(lstm, seq)[0], lstm_target)[0]

        hT, cache = lstm_forward(lstm, seq)
        grads = lstm_backward(lstm, cache, loss_mse(hT, lstm_target)[1])
        record("lstm", gradient_check(lstm_loss, lstm.parameters(), grads, h))

        logits = rng.normal(size=(3, 5))
        one_hot = np.eye(5)[rng.integers(0, 5, size=3)]
        pred = rng.normal(size=(3, 5))
        record("mse", max_relative_error(loss_mse(pred, one_hot)[1],
                                         numeric_gradient(lambda: loss_mse(pred, one_hot)[0], pred, h)))
        record("softmax-ce", max_relative_error(loss_softmax_ce(logits, one_hot)[1],
                                                numeric_gradient(lambda: loss_softmax_ce(logits, one_hot)[0], logits, h)))
    return worst
