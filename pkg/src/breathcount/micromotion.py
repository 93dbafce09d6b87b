"""Micro-displacement time series for detected radar points.

Per point and frame the estimator reads the Doppler spectrum at the
point's (range_bin, azimuth_bin) cell, takes the strongest non-zero
velocity bin, and converts it to a displacement d = v * frame_time (the
active chirping duration during which that velocity was observed). When
the zero-velocity bin dominates the best moving bin by more than the
dominance margin, or when the point was not detected in that frame, the
displacement is zero. Displacements are therefore quantized to multiples
of velocity_resolution * frame_time and sampled once per frame period.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cfar import RadarPoint
from .config import RadarConfig
from .dsp import FrameSpectra

# Zero-Doppler dominance margin. With rectangular chirp windowing, a
# sub-bin velocity of delta bins leaves the zero/first-bin power ratio at
# 20*log10((1-delta)/delta) dB, so 6 dB admits |v| above ~1/3 of a
# velocity bin while a genuinely static return (all energy at bin zero)
# stays zeroed.
DEFAULT_ZERO_MARGIN_DB = 6.0


@dataclass
class MicroMotionMatrix:
    """Signed radial displacements [m], one row per point, one column per frame."""

    points: list[RadarPoint]
    displacement: np.ndarray
    frame_period: float

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_frames(self) -> int:
        return self.displacement.shape[1] if self.displacement.size else 0


@dataclass
class DopplerCellSummary:
    """Per-cell reduction of one frame's Doppler cube.

    Keeps only what the displacement estimator needs: power at the
    zero-velocity bin and the power/velocity of the best moving bin, so
    streamed recordings never hold more than one full cube.
    """

    zero_power: np.ndarray      # (range_bins, azimuth_bins)
    best_power: np.ndarray      # (range_bins, azimuth_bins)
    best_velocity: np.ndarray   # (range_bins, azimuth_bins), m/s


def summarize_doppler(spectra: FrameSpectra) -> DopplerCellSummary:
    power = np.abs(spectra.doppler_cube) ** 2        # (doppler, azimuth, range)
    zero_bin = spectra.zero_velocity_bin
    zero_power = power[zero_bin].T.copy()            # (range, azimuth)

    moving = np.delete(power, zero_bin, axis=0)
    velocities = np.delete(spectra.velocities, zero_bin)
    # Order candidate bins by descending velocity so argmax resolves exact
    # power ties toward the positive (receding) velocity.
    order = np.argsort(velocities)[::-1]
    moving = moving[order]
    velocities = velocities[order]
    best_idx = np.argmax(moving, axis=0)             # (azimuth, range)
    best_power = np.take_along_axis(moving, best_idx[None], axis=0)[0].T.copy()
    best_velocity = velocities[best_idx].T.copy()
    return DopplerCellSummary(zero_power, best_power, best_velocity)


def displacement_from_bins(
    zero_power: np.ndarray,
    best_power: np.ndarray,
    best_velocity: np.ndarray,
    frame_time: float,
    zero_margin_db: float = DEFAULT_ZERO_MARGIN_DB,
) -> np.ndarray:
    """d = v_best * frame_time, zeroed when the zero-velocity bin dominates."""
    margin = 10.0 ** (zero_margin_db / 10.0)
    static = zero_power > margin * best_power
    return np.where(static | (best_power <= 0.0), 0.0, best_velocity * frame_time)


def _displacement_from_summary(
    summary: DopplerCellSummary,
    cells: Sequence[tuple[int, int]],
    frame_time: float,
    zero_margin_db: float,
) -> np.ndarray:
    rb = np.array([c[0] for c in cells], dtype=int)
    ab = np.array([c[1] for c in cells], dtype=int)
    return displacement_from_bins(
        summary.zero_power[rb, ab],
        summary.best_power[rb, ab],
        summary.best_velocity[rb, ab],
        frame_time,
        zero_margin_db,
    )


def cell_doppler_bins(
    chirp_columns: np.ndarray, config: RadarConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Zero-bin power and best moving bin per cell from raw chirp columns.

    chirp_columns: (chirps, n_cells) complex, taken from the range/azimuth
    FFT output before any Doppler transform. Equivalent to reading the full
    Doppler cube at those cells, but only FFTs the cells that need it.
    """
    n_chirps = chirp_columns.shape[0]
    spec = np.fft.fft(chirp_columns, axis=0) / np.sqrt(n_chirps)
    power = np.abs(spec.astype(np.complex128)) ** 2
    zero_p = power[0]
    velocities = -np.fft.fftfreq(n_chirps)[1:] * config.wavelength / (2.0 * config.chirp_time)
    moving = power[1:]
    order = np.argsort(velocities)[::-1]   # ties in power resolve toward positive v
    moving = moving[order]
    velocities = velocities[order]
    best_idx = np.argmax(moving, axis=0)
    best_p = moving[best_idx, np.arange(moving.shape[1])]
    best_v = velocities[best_idx]
    return zero_p, best_p, best_v


def estimate_micro_displacement(
    doppler_frames: Iterable[FrameSpectra | DopplerCellSummary],
    points: Sequence[RadarPoint],
    config: RadarConfig,
    detected: np.ndarray | None = None,
    zero_margin_db: float = DEFAULT_ZERO_MARGIN_DB,
) -> MicroMotionMatrix:
    """Displacement matrix (points x frames) from per-frame Doppler data.

    detected: optional boolean (n_points, n_frames) mask of per-frame CFAR
    detections; entries for undetected frames are forced to zero.
    """
    cells = [p.cell for p in points]
    columns = []
    for item in doppler_frames:
        summary = item if isinstance(item, DopplerCellSummary) else summarize_doppler(item)
        if cells:
            columns.append(
                _displacement_from_summary(summary, cells, config.frame_time, zero_margin_db)
            )
        else:
            columns.append(np.zeros(0))
    displacement = np.stack(columns, axis=1) if columns else np.zeros((len(points), 0))
    if detected is not None and displacement.size:
        displacement = np.where(detected, displacement, 0.0)
    return MicroMotionMatrix(
        points=list(points),
        displacement=displacement,
        frame_period=config.frame_period,
    )


def remove_invalid_signals(
    matrix: MicroMotionMatrix, min_nonzero_fraction: float = 0.25
) -> MicroMotionMatrix:
    """Keep rows with enough non-zero samples and both displacement signs.

    An empty result is legal and means no static breathers were observed;
    downstream stages propagate it as a zero-person outcome.
    """
    if not 0.0 <= min_nonzero_fraction <= 1.0:
        raise ValueError(f"min_nonzero_fraction must be in [0, 1], got {min_nonzero_fraction}")
    d = matrix.displacement
    if d.size == 0:
        return MicroMotionMatrix(points=[], displacement=d.reshape(0, matrix.n_frames), frame_period=matrix.frame_period)
    nonzero_frac = np.count_nonzero(d, axis=1) / d.shape[1]
    keep = (nonzero_frac >= min_nonzero_fraction) & (d > 0).any(axis=1) & (d < 0).any(axis=1)
    idx = np.flatnonzero(keep)
    return MicroMotionMatrix(
        points=[matrix.points[i] for i in idx],
        displacement=d[idx].copy(),
        frame_period=matrix.frame_period,
    )


def write_micromotion_csv(matrix: MicroMotionMatrix, path) -> None:
    """CSV export: range_bin, azimuth_bin, then one column per frame [m]."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["range_bin", "azimuth_bin"] + [f"frame_{j}" for j in range(matrix.n_frames)]
        )
        for point, row in zip(matrix.points, matrix.displacement):
            writer.writerow(
                [point.range_bin, point.azimuth_bin] + [f"{v:.9e}" for v in row]
            )
