"""Render the three benchmark figures from a trajectory log.

``errors``      position error and sliding variable components, stacked
``contraction`` metric distance to the desired state over the Hamiltonian
                and desired Hamiltonian
``control``     control input components
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .reader import CsvFormatError, TrajectoryData, read_trajectory

FIGURE_IDS = ("errors", "contraction", "control")

_FIGSIZE = (7.0, 5.0)
_DPI = 120


@dataclass(frozen=True)
class FigureSpec:
    csv_path: Path
    figure_id: str
    out_path: Path

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise ValueError(f"unknown figure id {self.figure_id!r}; expected one of {FIGURE_IDS}")


def _annotate_truncation(fig, data: TrajectoryData) -> None:
    if data.truncated:
        fig.text(0.5, 0.01, f"truncated run: {data.truncation_note}",
                 ha="center", color="crimson", fontsize=8)


def _render_errors(data: TrajectoryData, fig) -> None:
    t = data.columns["t"]
    axes = fig.subplots(2, 1, sharex=True)
    for name in data.group("q_tilde"):
        axes[0].plot(t, data.columns[name], label=name)
    axes[0].set_ylabel("position error [rad, m]")
    axes[0].legend(loc="upper right", fontsize=8)
    axes[0].grid(True, alpha=0.3)
    for name in data.group("sigma"):
        axes[1].plot(t, data.columns[name], label=name)
    axes[1].set_ylabel("sliding variable")
    axes[1].set_xlabel("t [s]")
    axes[1].legend(loc="upper right", fontsize=8)
    axes[1].grid(True, alpha=0.3)


def _render_contraction(data: TrajectoryData, fig) -> None:
    data.require("t", "dist", "H", "H_d")
    t = data.columns["t"]
    axes = fig.subplots(2, 1, sharex=True)
    axes[0].plot(t, data.columns["dist"], color="tab:purple")
    axes[0].set_ylabel("d(x, x_d)")
    axes[0].grid(True, alpha=0.3)
    axes[1].plot(t, data.columns["H"], label="H")
    axes[1].plot(t, data.columns["H_d"], "--", label="H_d")
    axes[1].set_ylabel("energy")
    axes[1].set_xlabel("t [s]")
    axes[1].legend(loc="upper right", fontsize=8)
    axes[1].grid(True, alpha=0.3)


def _render_control(data: TrajectoryData, fig) -> None:
    t = data.columns["t"]
    ax = fig.subplots()
    for name in data.group("u"):
        ax.plot(t, data.columns[name], label=name)
    ax.set_ylabel("control input")
    ax.set_xlabel("t [s]")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, alpha=0.3)


_RENDERERS = {
    "errors": _render_errors,
    "contraction": _render_contraction,
    "control": _render_control,
}


def render(spec: FigureSpec) -> Path:
    """Write the requested figure; raises before creating any file on bad input."""
    data = read_trajectory(spec.csv_path)
    data.require("t")
    fig = plt.figure(figsize=_FIGSIZE, dpi=_DPI)
    try:
        _RENDERERS[spec.figure_id](data, fig)
        _annotate_truncation(fig, data)
        spec.out_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.out_path)
    finally:
        plt.close(fig)
    return spec.out_path
