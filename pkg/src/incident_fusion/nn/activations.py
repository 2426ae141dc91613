"""Element-wise activations and their exact derivatives.

All functions accept scalars or arrays. ``relu'(0)`` is defined as 0 and
ELU uses alpha = 1.
"""
import numpy as np

ACTIVATIONS = ("relu", "elu", "tanh", "sigmoid", "identity")
BOTTLENECK_ACTIVATIONS = ("relu", "elu", "tanh", "sigmoid")


def _sigmoid(x):
    # split by sign so exp never overflows
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activate(x, kind: str):
    """
    Apply an activation function.

    Examples
    --------
    >>> float(activate(-1.0, "relu")), float(activate(0.0, "sigmoid"))
    (0.0, 0.5)
    >>> round(float(activate(-1.0, "elu")), 4)
    -0.6321
    """
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        out = np.maximum(x, 0.0)
    elif kind == "elu":
        out = np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))
    elif kind == "tanh":
        out = np.tanh(x)
    elif kind == "sigmoid":
        out = _sigmoid(np.atleast_1d(x)).reshape(x.shape)
    elif kind == "identity":
        out = x.copy()
    else:
        raise ValueError(f"unknown activation '{kind}'")
    return out[()] if out.ndim == 0 else out


def activate_grad(x, kind: str):
    """Derivative of :func:`activate` with respect to its pre-activation input."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        out = (x > 0).astype(np.float64)
    elif kind == "elu":
        out = np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))
    elif kind == "tanh":
        out = 1.0 - np.tanh(x) ** 2
    elif kind == "sigmoid":
        s = _sigmoid(np.atleast_1d(x)).reshape(x.shape)
        out = s * (1.0 - s)
    elif kind == "identity":
        out = np.ones_like(x)
    else:
        raise ValueError(f"unknown activation '{kind}'")
    return out[()] if out.ndim == 0 else out


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return _sigmoid(np.atleast_1d(x)).reshape(x.shape)
