"""Matplotlib figure rendering for the CLI report paths.

Every function writes a figure file next to the delimited output; nothing
here feeds back into analysis. The Agg backend keeps rendering headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .embedding import FnnCurve
from .parameters import ParameterSeries
from .signatures import FrequencyTable
from .trajectory import Projection


def save_series_plot(series: ParameterSeries, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.step(range(len(series.values)), series.values, where="post", linewidth=0.8)
    label = series.parameter.name if series.parameter else "value"
    ax.set_xlabel(f"bin index (tau = {series.tau} s)")
    ax.set_ylabel(label)
    ax.set_title(f"{label} per {series.tau} s interval")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_fnn_plot(curve: FnnCurve, path: str | Path) -> None:
    dims = [d for d in range(1, curve.max_dim + 1) if curve.fractions[d - 1] is not None]
    fracs = [curve.fractions[d - 1] for d in dims]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(dims, fracs, marker="o")
    ax.set_xlabel("embedding dimension d")
    ax.set_ylabel("false neighbor fraction")
    ax.set_ylim(bottom=0)
    ax.set_title(f"false nearest neighbors (T = {curve.delay_T})")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_projection_plot(projection: Projection, path: str | Path) -> None:
    pts = projection.points
    if len(projection.axes) == 3:
        fig = plt.figure(figsize=(6, 5))
        ax = fig.add_subplot(projection="3d")
        ax.plot(pts[:, 0], pts[:, 1], pts[:, 2], linewidth=0.7)
        ax.set_xlabel(f"component {projection.axes[0]}")
        ax.set_ylabel(f"component {projection.axes[1]}")
        ax.set_zlabel(f"component {projection.axes[2]}")
    else:
        fig, ax = plt.subplots(figsize=(6, 5))
        ax.plot(pts[:, 0], pts[:, 1], linewidth=0.7)
        ax.set_xlabel(f"component {projection.axes[0]}")
        ax.set_ylabel(f"component {projection.axes[1]}")
    fig.suptitle("phase-space trajectory projection")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_frequency_plot(table: FrequencyTable, path: str | Path) -> None:
    numbers = [row.number for row in table.rows]
    freqs = [row.frequency for row in table.rows]
    labels = [f"{row.protocol} {row.parameter}" for row in table.rows]
    fig, ax = plt.subplots(figsize=(9, 4.2))
    ax.bar(numbers, freqs, color="#4878a8")
    ax.set_xticks(numbers)
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("rules using parameter")
    ax.set_title("signature parameter frequency of use")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
