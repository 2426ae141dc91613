"""Small dense/LSTM network engine with hand-derived backpropagation."""
from .activations import ACTIVATIONS, activate, activate_grad
from .dense import DenseLayer, dense_backward, dense_forward
from .losses import loss_mse, loss_softmax_ce, softmax
from .lstm import LstmCache, LstmLayer, lstm_backward, lstm_forward
from .optim import OptimizerState, clip_by_global_norm, optimizer_step
from .gradcheck import check_layers, gradient_check, max_relative_error, numeric_gradient
from .serialize import layer_from_dict, layer_to_dict, load_model, save_model

__all__ = [
    "ACTIVATIONS",
    "activate",
    "activate_grad",
    "DenseLayer",
    "dense_forward",
    "dense_backward",
    "LstmLayer",
    "LstmCache",
    "lstm_forward",
    "lstm_backward",
    "loss_mse",
    "loss_softmax_ce",
    "softmax",
    "OptimizerState",
    "optimizer_step",
    "clip_by_global_norm",
    "layer_to_dict",
    "layer_from_dict",
    "save_model",
    "load_model",
    "gradient_check",
    "numeric_gradient",
    "max_relative_error",
    "check_layers",
]
