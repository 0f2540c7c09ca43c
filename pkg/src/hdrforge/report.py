"""Matplotlib figure rendering for CLI reports.

Figures are drawn on explicit Agg canvases (no pyplot, no global backend
state), so rendering works headless and never touches an interactive GUI.
"""

import os

import numpy as np

from .calibration import NUM_LEVELS, ResponseCurve

_CHANNEL_COLORS = ("#d62728", "#2ca02c", "#1f77b4")
_CHANNEL_NAMES = ("red", "green", "blue")


def _new_figure(width=6.4, height=4.2):
    from matplotlib.figure import Figure  # deferred: keeps import cost off hot paths

    fig = Figure(figsize=(width, height), dpi=120)
    ax = fig.add_subplot(111)
    return fig, ax


def plot_loss_curve(steps, losses, path: str | os.PathLike) -> None:
    """Render recorded loss values against iteration index."""
    steps = np.asarray(steps)
    losses = np.asarray(losses, dtype=np.float64)
    fig, ax = _new_figure()
    ax.plot(steps, losses, color="#1f77b4", linewidth=1.5)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_title("optimization trace")
    if losses.size and losses.min() > 0 and losses.max() / losses.min() > 50:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(os.fspath(path))


def plot_response_curve(curve: ResponseCurve, path: str | os.PathLike) -> None:
    """Render the recovered log response, one line per channel."""
    fig, ax = _new_figure()
    z = np.arange(NUM_LEVELS)
    for c in range(3):
        ax.plot(z, curve.g[:, c], color=_CHANNEL_COLORS[c],
                linewidth=1.2, label=_CHANNEL_NAMES[c])
    ax.axvline(curve.anchor_index, color="gray", linewidth=0.8, linestyle="--")
    ax.set_xlabel("pixel level")
    ax.set_ylabel("log exposure g(z)")
    ax.set_title("camera response")
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(os.fspath(path))
