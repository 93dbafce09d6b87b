"""Spatial breathing profiles: stacked per-source mixing weight vectors.

Each surviving breathing source contributes one row; columns are the valid
radar points in canonical (range_bin, azimuth_bin) order. Rows are sign
fixed (largest-magnitude entry positive, removing the ICA sign ambiguity)
and L2-normalized, so rows from the same person line up regardless of
source scale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .breathing import BreathingSource
from .cfar import RadarPoint

RASTER_ROWS = 32
RASTER_COLS = 32


@dataclass
class SpatialBreathingProfile:
    matrix: np.ndarray               # (components, spatial_bins), rows unit norm
    cells: list[tuple[int, int]]     # (range_bin, azimuth_bin) per column

    @property
    def n_components(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_bins(self) -> int:
        return self.matrix.shape[1]


def _canonicalize_row(row: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(row)
    if norm == 0.0:
        return row
    flipped = row if row[np.argmax(np.abs(row))] >= 0 else -row
    return flipped / np.linalg.norm(flipped)


def build_profile(
    sources: list[BreathingSource], points: list[RadarPoint]
) -> SpatialBreathingProfile:
    """Stack normalized spatial mappings; empty sources give an empty profile."""
    order = sorted(range(len(points)), key=lambda i: (points[i].range_bin, points[i].azimuth_bin))
    cells = [(points[i].range_bin, points[i].azimuth_bin) for i in order]
    if not sources:
        return SpatialBreathingProfile(matrix=np.zeros((0, len(cells))), cells=cells)
    rows = []
    for src in sources:
        if len(src.mixing_weights) != len(points):
            raise ValueError(
                f"source has {len(src.mixing_weights)} weights for {len(points)} points"
            )
        rows.append(_canonicalize_row(np.asarray(src.mixing_weights, dtype=np.float64)[order]))
    return SpatialBreathingProfile(matrix=np.stack(rows), cells=cells)


def augment_profile(profile: SpatialBreathingProfile, seed: int) -> SpatialBreathingProfile:
    """Row-shuffled copy; the multiset of rows is preserved exactly."""
    if profile.n_components == 0:
        raise ValueError("cannot augment an empty profile")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(profile.n_components)
    return SpatialBreathingProfile(matrix=profile.matrix[perm].copy(), cells=list(profile.cells))


def rasterize_profile(
    profile: SpatialBreathingProfile,
    rows: int = RASTER_ROWS,
    cols: int = RASTER_COLS,
) -> np.ndarray:
    """Fixed-size single-channel image for the classifier.

    Rows beyond the raster height are dropped from the end (components from
    early, small ICA runs come first and are the strongest); missing rows
    are zero padded. Columns are binned onto the fixed spatial axis in
    point order, averaging points that share a bin.
    """
    out = np.zeros((rows, cols))
    m = profile.matrix[:rows]
    k = profile.n_bins
    if m.size == 0 or k == 0:
        return out
    bins = (np.arange(k) * cols) // k
    for j in range(cols):
        sel = bins == j
        if sel.any():
            out[: m.shape[0], j] = m[:, sel].mean(axis=1)
    return out


def write_profile_csv(profile: SpatialBreathingProfile, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"point:{rb}:{ab}" for rb, ab in profile.cells])
        for row in profile.matrix:
            writer.writerow([f"{v:.9e}" for v in row])


def read_profile_csv(path) -> SpatialBreathingProfile:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty profile file") from None
        cells = []
        for name in header:
            parts = name.split(":")
            if len(parts) != 3 or parts[0] != "point":
                raise ValueError(f"{path}: bad profile column header {name!r}")
            cells.append((int(parts[1]), int(parts[2])))
        rows = [[float(v) for v in line] for line in reader if line]
    matrix = np.array(rows) if rows else np.zeros((0, len(cells)))
    if matrix.size and matrix.shape[1] != len(cells):
        raise ValueError(f"{path}: row width does not match header")
    return SpatialBreathingProfile(matrix=matrix, cells=cells)
