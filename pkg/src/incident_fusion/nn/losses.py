"""Loss functions returning ``(value, gradient w.r.t. predictions)``."""
import numpy as np

from ..errors import DimensionError


def loss_mse(pred, target):
    """Mean squared error over all elements; gradient ``2 (pred - target) / n``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    n = diff.size
    return float(np.mean(diff**2)), 2.0 * diff / n


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def loss_softmax_ce(logits, one_hot):
    """
    Softmax cross-entropy averaged over the batch.

    Examples
    --------
    >>> round(loss_softmax_ce(np.zeros((1, 5)), np.eye(5)[[0]])[0], 4)
    1.6094
    """
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    one_hot = np.atleast_2d(np.asarray(one_hot, dtype=np.float64))
    if logits.shape != one_hot.shape:
        raise DimensionError(f"logits shape {logits.shape} != target shape {one_hot.shape}")
    if not np.allclose(one_hot.sum(axis=1), 1.0) or ((one_hot != 0) & (one_hot != 1)).any():
        raise ValueError("targets must be one-hot rows")
    batch = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    value = -float(np.sum(log_probs * one_hot)) / batch
    return value, (np.exp(log_probs) - one_hot) / batch
