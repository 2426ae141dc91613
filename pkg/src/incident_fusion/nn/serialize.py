"""Versioned JSON format for network layers."""
from __future__ import annotations

import json
from os import PathLike
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from ..errors import ConfigurationError, MissingArtifactError
from .dense import DenseLayer
from .lstm import GATES, LstmLayer

FORMAT_NAME = "incident-fusion-nn"
FORMAT_VERSION = 1


def layer_to_dict(name: str, layer: Union[DenseLayer, LstmLayer]) -> dict:
    if isinstance(layer, DenseLayer):
        return {
            "name": name,
            "type": "dense",
            "activation": layer.activation,
            "shape": list(layer.weights.shape),
            "weights": layer.weights.ravel().tolist(),
            "bias": layer.bias.tolist(),
        }
    if isinstance(layer, LstmLayer):
        out = {
            "name": name,
            "type": "lstm",
            "input_size": layer.input_size,
            "hidden_size": layer.hidden_size,
        }
        for gate in GATES:
            out[f"W_{gate}"] = getattr(layer, f"W_{gate}").ravel().tolist()
            out[f"b_{gate}"] = getattr(layer, f"b_{gate}").tolist()
        return out
    raise TypeError(f"cannot serialise {type(layer).__name__}")


def layer_from_dict(data: dict) -> Union[DenseLayer, LstmLayer]:
    if data["type"] == "dense":
        rows, cols = data["shape"]
        return DenseLayer(
            np.asarray(data["weights"], dtype=np.float64).reshape(rows, cols),
            np.asarray(data["bias"], dtype=np.float64),
            data["activation"],
        )
    if data["type"] == "lstm":
        n_in, n_h = data["input_size"], data["hidden_size"]
        arrays = {}
        for gate in GATES:
            arrays[f"W_{gate}"] = np.asarray(data[f"W_{gate}"], dtype=np.float64).reshape(n_h, n_in + n_h)
            arrays[f"b_{gate}"] = np.asarray(data[f"b_{gate}"], dtype=np.float64)
        return LstmLayer(n_in, n_h, **arrays)
    raise ConfigurationError(f"unknown layer type '{data['type']}'")


def save_model(
    path: Union[str, PathLike],
    layers: Sequence[tuple[str, Union[DenseLayer, LstmLayer]]],
    meta: dict | None = None,
) -> None:
    """Write named layers plus free-form metadata (config echo, normalisation constants)."""
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "layers": [layer_to_dict(name, layer) for name, layer in layers],
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_model(path: Union[str, PathLike]) -> tuple[dict, dict]:
    """Return ``({name: layer}, meta)`` from a file written by :func:`save_model`."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(str(path))
    payload = json.loads(path.read_text())
    if payload.get("format") != FORMAT_NAME or payload.get("version") != FORMAT_VERSION:
        raise ConfigurationError(f"{path} is not a version {FORMAT_VERSION} model file")
    layers = {item["name"]: layer_from_dict(item) for item in payload["layers"]}
    return layers, payload["meta"]
