"""Phase-space trajectory projection and occupancy-based deviation scoring.

A delay-vector set draws a trajectory in R^dim; projecting two or three
components gives a plottable curve. Occupancy histograms turn a trajectory
into a probability mass over a fixed grid, and the L1 distance between two
such masses scores how far observed behavior has drifted from a baseline.
The score lives in [0, 2]: 0 for identical occupancy, 2 for disjoint support.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .embedding import DelayVectorSet
from .errors import BadAxes, BadBounds, IncompatibleHistograms


@dataclass
class Projection:
    """Trajectory points restricted to the chosen vector components."""

    axes: tuple[int, ...]
    points: np.ndarray  # shape (M, len(axes))

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class OccupancyHistogram:
    """Normalized cell occupancy of a projected trajectory.

    mass is flat in C order over bins_per_axis ** len(axes) cells and sums to
    1 for any non-empty projection (0 when empty).
    """

    axes: tuple[int, ...]
    bounds: tuple[tuple[float, float], ...]
    bins_per_axis: int
    mass: np.ndarray


def project(vectors: DelayVectorSet, axes: Sequence[int]) -> Projection:
    """Copy 2 or 3 distinct vector components, in the order given."""
    axes_t = tuple(int(a) for a in axes)
    if len(axes_t) not in (2, 3):
        raise BadAxes(f"need 2 or 3 axes, got {len(axes_t)}")
    if len(set(axes_t)) != len(axes_t):
        raise BadAxes(f"axes must be distinct, got {axes_t}")
    for a in axes_t:
        if not 0 <= a < vectors.dim:
            raise BadAxes(f"axis {a} out of range for dim {vectors.dim}")
    return Projection(axes=axes_t, points=vectors.vectors[:, axes_t].copy())


def _cell_indices(coords: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    # Width-zero bounds can only arise from a constant axis; every point then
    # sits on the max edge and the max-edge rule applies.
    if hi == lo:
        return np.full(len(coords), bins - 1, dtype=np.int64)
    scaled = (coords - lo) * bins / (hi - lo)
    idx = np.floor(scaled).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def occupancy(
    projection: Projection,
    bins_per_axis: int,
    bounds: Sequence[tuple[float, float]] | None = None,
) -> OccupancyHistogram:
    """Histogram a projection onto a fixed grid and normalize to unit mass.

    bounds default to the per-axis data min/max. Points on a max edge land in
    the last cell; under caller-fixed bounds, out-of-range points clip to the
    nearest edge cell so recurring escapees still register as mass drift.
    """
    if bins_per_axis < 2:
        raise BadBounds(f"bins_per_axis must be >= 2, got {bins_per_axis}")
    k = len(projection.axes)
    pts = projection.points
    if bounds is not None:
        bounds_t = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(bounds_t) != k:
            raise BadBounds(f"need {k} bounds pairs, got {len(bounds_t)}")
        for lo, hi in bounds_t:
            if not lo < hi:
                raise BadBounds(f"bounds must satisfy min < max, got ({lo}, {hi})")
    elif len(pts) == 0:
        bounds_t = tuple((0.0, 1.0) for _ in range(k))
    else:
        bounds_t = tuple(
            (float(pts[:, a].min()), float(pts[:, a].max())) for a in range(k)
        )

    mass = np.zeros(bins_per_axis**k, dtype=float)
    if len(pts):
        flat = np.zeros(len(pts), dtype=np.int64)
        for a in range(k):
            lo, hi = bounds_t[a]
            flat = flat * bins_per_axis + _cell_indices(pts[:, a], lo, hi, bins_per_axis)
        np.add.at(mass, flat, 1.0)
        mass /= len(pts)
    return OccupancyHistogram(
        axes=projection.axes, bounds=bounds_t, bins_per_axis=bins_per_axis, mass=mass
    )


def occupancy_like(projection: Projection, template: OccupancyHistogram) -> OccupancyHistogram:
    """Histogram a projection onto an existing histogram's exact grid.

    Unlike occupancy() with explicit bounds, this accepts degenerate
    (width-zero) template axes, which legitimately arise when the template
    was auto-bounded over a constant axis; such axes route every point to
    the last cell. The result is always comparable with the template.
    """
    if len(template.axes) != len(projection.axes):
        raise IncompatibleHistograms(
            f"projection has {len(projection.axes)} axes, template {len(template.axes)}"
        )
    k = len(template.axes)
    bins_per_axis = template.bins_per_axis
    pts = projection.points
    mass = np.zeros(bins_per_axis**k, dtype=float)
    if len(pts):
        flat = np.zeros(len(pts), dtype=np.int64)
        for a in range(k):
            lo, hi = template.bounds[a]
            flat = flat * bins_per_axis + _cell_indices(pts[:, a], lo, hi, bins_per_axis)
        np.add.at(mass, flat, 1.0)
        mass /= len(pts)
    return OccupancyHistogram(
        axes=projection.axes,
        bounds=template.bounds,
        bins_per_axis=bins_per_axis,
        mass=mass,
    )


def deviation_score(baseline: OccupancyHistogram, observed: OccupancyHistogram) -> float:
    """L1 (total variation x2) distance between two occupancy masses."""
    if (
        baseline.axes != observed.axes
        or baseline.bins_per_axis != observed.bins_per_axis
        or baseline.bounds != observed.bounds
    ):
        raise IncompatibleHistograms(
            "histograms differ in axes, bounds, or bins_per_axis"
        )
    return float(np.abs(baseline.mass - observed.mass).sum())


PROJECTION_CSV_FIELDS_2D = ("t_index", "x", "y")
PROJECTION_CSV_FIELDS_3D = ("t_index", "x", "y", "z")


def write_projection_csv(projection: Projection, fh: IO[str]) -> None:
    writer = csv.writer(fh)
    header = PROJECTION_CSV_FIELDS_3D if len(projection.axes) == 3 else PROJECTION_CSV_FIELDS_2D
    writer.writerow(header)
    for i, point in enumerate(projection.points):
        writer.writerow([i, *[repr(float(c)) for c in point]])


HISTOGRAM_CSV_FIELDS = ("cell_index", "mass")


def write_histogram_csv(histogram: OccupancyHistogram, fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(HISTOGRAM_CSV_FIELDS)
    for i, m in enumerate(histogram.mass):
        writer.writerow([i, repr(float(m))])


def histogram_to_dict(histogram: OccupancyHistogram) -> dict:
    return {
        "axes": list(histogram.axes),
        "bounds": [[lo, hi] for lo, hi in histogram.bounds],
        "bins_per_axis": histogram.bins_per_axis,
        "mass": [float(m) for m in histogram.mass],
    }


def histogram_from_dict(payload: dict) -> OccupancyHistogram:
    axes = tuple(int(a) for a in payload["axes"])
    bounds = tuple((float(lo), float(hi)) for lo, hi in payload["bounds"])
    bins = int(payload["bins_per_axis"])
    mass = np.asarray(payload.get("mass", np.zeros(bins ** len(axes))), dtype=float)
    return OccupancyHistogram(axes=axes, bounds=bounds, bins_per_axis=bins, mass=mass)


def write_histogram_json(histogram: OccupancyHistogram, fh: IO[str]) -> None:
    json.dump(histogram_to_dict(histogram), fh, indent=2, sort_keys=True)
    fh.write("\n")


def read_histogram_json(fh: IO[str]) -> OccupancyHistogram:
    return histogram_from_dict(json.load(fh))


def write_gnuplot_script(
    csv_name: str, ndim: int, fh: IO[str], title: str = "trajectory"
) -> None:
    """Emit a gnuplot script that plots a projection CSV written by this module."""
    fh.write("set datafile separator ','\n")
    fh.write(f"set title '{title}'\n")
    fh.write("set key off\n")
    if ndim == 3:
        fh.write(f"splot '{csv_name}' every ::1 using 2:3:4 with lines\n")
    else:
        fh.write(f"plot '{csv_name}' every ::1 using 2:3 with lines\n")
    fh.write("pause -1\n")
