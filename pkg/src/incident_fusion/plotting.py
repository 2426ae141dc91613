"""SVG figures written by the reports (scatter with front, bars, series, loss curves)."""
from __future__ import annotations

from os import PathLike
from typing import Mapping, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Fixed salt and no date stamp keep the SVG bytes reproducible.
matplotlib.rcParams["svg.hashsalt"] = "incident-fusion"
_SVG_METADATA = {"Date": None, "Creator": None}


def _save(fig, path: Union[str, PathLike]) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)


def scatter_with_front(
    x: Sequence[float],
    y: Sequence[float],
    front_x: Sequence[float],
    front_y: Sequence[float],
    path: Union[str, PathLike],
    xlabel: str = "MAPE, %",
    ylabel: str = "RMSE",
    title: str = "",
) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(x, y, s=4, alpha=0.4, color="tab:blue", label="evaluations")
    order = np.argsort(front_x, kind="stable")
    ax.plot(np.asarray(front_x)[order], np.asarray(front_y)[order], "o-", color="tab:orange",
            markersize=4, label="Pareto front")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    _save(fig, path)


def bar_chart(
    labels: Sequence[str],
    values: Sequence[float],
    path: Union[str, PathLike],
    ylabel: str = "MAPE, %",
    horizontal: bool = False,
    title: str = "",
) -> None:
    height = max(3.0, 0.35 * len(labels)) if horizontal else 3.5
    fig, ax = plt.subplots(figsize=(5, height))
    colors = ["tab:green" if v >= 0 else "tab:red" for v in values]
    if horizontal:
        ax.barh(list(labels)[::-1], list(values)[::-1], color=colors[::-1])
        ax.set_xlabel(ylabel)
    else:
        ax.bar(list(labels), list(values), color="tab:blue")
        ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    _save(fig, path)


def series_figure(
    x: np.ndarray,
    panels: Mapping[str, tuple[np.ndarray, np.ndarray]],
    title: str,
    path: Union[str, PathLike],
) -> None:
    fig, axes = plt.subplots(len(panels), 1, figsize=(7, 2.5 * len(panels)), sharex=True)
    axes = np.atleast_1d(axes)
    for ax, (name, (today, week_before)) in zip(axes, panels.items()):
        ax.plot(x, today, color="tab:blue", label="day of incident")
        ax.plot(x, week_before, color="tab:gray", alpha=0.7, label="week before")
        ax.axvline(0.0, color="tab:red")
        ax.set_ylabel(name)
        ax.legend(loc="lower left", fontsize=7)
    axes[-1].set_xlabel("hours relative to incident start")
    axes[0].set_title(title)
    _save(fig, path)


def loss_curves(
    train: Sequence[float], validation: Sequence[float], path: Union[str, PathLike], title: str = ""
) -> None:
    epochs = np.arange(1, len(train) + 1)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(epochs, train, label="train")
    if len(validation):
        ax.plot(epochs, validation, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    if title:
        ax.set_title(title)
    ax.legend()
    _save(fig, path)
