"""2D cell-averaging CFAR detection on range-azimuth power maps.

A cell is declared a detection when its linear power exceeds
alpha * mean(training cells), with alpha = N * (pfa**(-1/N) - 1) for N
training cells, the standard CA-CFAR scaling for a fixed false-alarm rate.
The training region is the square (guard+train) neighborhood minus the
guard square; cells near the map edge use the clipped (one-sided) window,
so N and alpha vary per cell.

The implementation is vectorized with summed-area tables; it must agree
cell-for-cell with a direct per-cell evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CfarConfigError(ValueError):
    """CFAR window does not fit inside the map."""


@dataclass(frozen=True)
class CfarParams:
    guard_cells: int = 2
    training_cells: int = 8
    pfa: float = 1e-3

    def __post_init__(self):
        if self.guard_cells < 0 or self.training_cells < 1:
            raise CfarConfigError("guard_cells must be >= 0 and training_cells >= 1")
        if not 0.0 < self.pfa < 1.0:
            raise CfarConfigError(f"pfa must be in (0, 1), got {self.pfa}")


def _box_sum(x: np.ndarray, radius: int) -> np.ndarray:
    """Sum over the (2r+1)x(2r+1) window centered at each cell, clipped at edges."""
    n, m = x.shape
    integral = np.zeros((n + 1, m + 1), dtype=np.float64)
    integral[1:, 1:] = np.cumsum(np.cumsum(x, axis=0), axis=1)
    i = np.arange(n)
    j = np.arange(m)
    lo_i = np.maximum(i - radius, 0)
    hi_i = np.minimum(i + radius, n - 1) + 1
    lo_j = np.maximum(j - radius, 0)
    hi_j = np.minimum(j + radius, m - 1) + 1
    return (
        integral[np.ix_(hi_i, hi_j)]
        - integral[np.ix_(lo_i, hi_j)]
        - integral[np.ix_(hi_i, lo_j)]
        + integral[np.ix_(lo_i, lo_j)]
    )


def _box_count(shape: tuple[int, int], radius: int) -> np.ndarray:
    n, m = shape
    i = np.arange(n)
    j = np.arange(m)
    rows = np.minimum(i + radius, n - 1) - np.maximum(i - radius, 0) + 1
    cols = np.minimum(j + radius, m - 1) - np.maximum(j - radius, 0) + 1
    return rows[:, None] * cols[None, :]


def ca_cfar_mask(power_db: np.ndarray, params: CfarParams = CfarParams()) -> np.ndarray:
    """Boolean detection mask for one dB power map (range_bins x azimuth_bins)."""
    n, m = power_db.shape
    outer = params.guard_cells + params.training_cells
    if 2 * outer + 1 > n or 2 * outer + 1 > m:
        raise CfarConfigError(
            f"CFAR window {2 * outer + 1} exceeds map dimensions {power_db.shape}"
        )
    linear = 10.0 ** (np.asarray(power_db, dtype=np.float64) / 10.0)

    train_sum = _box_sum(linear, outer) - _box_sum(linear, params.guard_cells)
    train_count = _box_count(linear.shape, outer) - _box_count(linear.shape, params.guard_cells)
    train_count = np.maximum(train_count, 1)
    alpha = train_count * (params.pfa ** (-1.0 / train_count) - 1.0)
    return linear > alpha * (train_sum / train_count)


def detect_cells(power_db: np.ndarray, params: CfarParams = CfarParams()) -> list[tuple[int, int]]:
    """Detected (range_bin, azimuth_bin) pairs for one map, row-major order."""
    mask = ca_cfar_mask(power_db, params)
    return [(int(r), int(a)) for r, a in np.argwhere(mask)]


def fit_cfar_params(params: CfarParams, map_shape: tuple[int, int]) -> CfarParams:
    """Shrink the training window so it fits a small map (e.g. few azimuth bins).

    Guard cells are preserved; training cells are reduced to keep
    2*(guard+train)+1 within the smaller map dimension. Raises when even a
    single training cell per side cannot fit.
    """
    max_outer = (min(map_shape) - 1) // 2
    train = min(params.training_cells, max_outer - params.guard_cells)
    if train < 1:
        raise CfarConfigError(
            f"map {map_shape} too small for guard_cells={params.guard_cells}"
        )
    if train == params.training_cells:
        return params
    return CfarParams(guard_cells=params.guard_cells, training_cells=train, pfa=params.pfa)


@dataclass(frozen=True)
class RadarPoint:
    """A range-azimuth cell that passed CFAR in at least one frame."""

    range_bin: int
    azimuth_bin: int
    range_m: float
    azimuth_deg: float
    power_db: float

    @property
    def cell(self) -> tuple[int, int]:
        return (self.range_bin, self.azimuth_bin)


def merge_detections(
    per_frame_cells: list[list[tuple[int, int]]],
    per_frame_power_db: list[np.ndarray],
    ranges: np.ndarray,
    azimuths: np.ndarray,
) -> tuple[list[RadarPoint], np.ndarray]:
    """Union of detections across frames keyed by cell identity.

    Returns the merged point list sorted by (range_bin, azimuth_bin) plus a
    boolean (n_points, n_frames) matrix of which frames each point was
    detected in. Point power is the maximum over its detecting frames.
    """
    n_frames = len(per_frame_cells)
    detected_frames: dict[tuple[int, int], list[int]] = {}
    for f, cells in enumerate(per_frame_cells):
        for cell in cells:
            detected_frames.setdefault(cell, []).append(f)

    cells_sorted = sorted(detected_frames)
    points = []
    mask = np.zeros((len(cells_sorted), n_frames), dtype=bool)
    for i, (rb, ab) in enumerate(cells_sorted):
        frames = detected_frames[(rb, ab)]
        mask[i, frames] = True
        peak = max(float(per_frame_power_db[f][rb, ab]) for f in frames)
        points.append(
            RadarPoint(
                range_bin=rb,
                azimuth_bin=ab,
                range_m=float(ranges[rb]),
                azimuth_deg=float(azimuths[ab]),
                power_db=peak,
            )
        )
    return points, mask
