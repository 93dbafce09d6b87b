"""End-to-end processing: IQ frames -> points -> micro-motion -> count.

Frames are consumed one at a time; per frame only the range-azimuth map,
the CFAR detections, and a three-number Doppler reduction per cell are
retained, so full-preset recordings process in bounded memory.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .breathing import (
    DEFAULT_BAND_HIGH_HZ,
    DEFAULT_BAND_LOW_HZ,
    DEFAULT_ICA_RUNS,
    DEFAULT_MIN_QUALITY,
    DEFAULT_RANK_FLOOR,
    BreathingSource,
    filter_breathing,
    iterative_ica,
)
from .cfar import CfarParams, RadarPoint, detect_cells, fit_cfar_params, merge_detections
from .config import RadarConfig
from .counting import CountEstimate, ModelRequiredError, count_by_classifier, count_by_clustering
from .dsp import DB_FLOOR, azimuth_axis, azimuth_fft, range_axis, range_fft
from .micromotion import (
    DEFAULT_ZERO_MARGIN_DB,
    MicroMotionMatrix,
    cell_doppler_bins,
    displacement_from_bins,
    remove_invalid_signals,
)
from .profiles import SpatialBreathingProfile, build_profile


@dataclass(frozen=True)
class PipelineConfig:
    cfar: CfarParams = CfarParams()
    min_nonzero_fraction: float = 0.25
    band_low_hz: float = DEFAULT_BAND_LOW_HZ
    band_high_hz: float = DEFAULT_BAND_HIGH_HZ
    min_quality: float = DEFAULT_MIN_QUALITY
    ica_runs: int = DEFAULT_ICA_RUNS
    ica_rank_floor: float = DEFAULT_RANK_FLOOR
    zero_margin_db: float = DEFAULT_ZERO_MARGIN_DB
    k_max: int = 8
    seed: int = 0
    estimator: str = "clustering"
    model_path: str | None = None


@dataclass
class ProcessResult:
    config: RadarConfig
    points: list[RadarPoint]
    detected: np.ndarray                    # (n_points, n_frames) bool
    micromotion: MicroMotionMatrix          # unfiltered, one row per point
    mean_map_db: np.ndarray                 # (range_bins, azimuth_bins)
    frame_detections: list[tuple]           # (frame, range_bin, azimuth_bin, power_db)


@dataclass
class CountResult:
    estimate: CountEstimate
    n_points: int = 0
    n_valid_points: int = 0
    n_sources: int = 0
    n_breathing_sources: int = 0
    profile: SpatialBreathingProfile | None = None
    breathing_sources: list[BreathingSource] = field(default_factory=list)
    valid_motion: MicroMotionMatrix | None = None

    def to_dict(self) -> dict:
        return {
            "count": self.estimate.count,
            "method": self.estimate.method,
            "confidence": self.estimate.confidence,
            "votes": {str(k): v for k, v in sorted(self.estimate.votes.items())},
            "n_points": self.n_points,
            "n_valid_points": self.n_valid_points,
            "n_sources": self.n_sources,
            "n_breathing_sources": self.n_breathing_sources,
        }


def process_frames(
    frames,
    config: RadarConfig,
    pipeline: PipelineConfig = PipelineConfig(),
) -> ProcessResult:
    """One streaming pass: FFT stages, CFAR per frame, per-cell Doppler.

    The range-azimuth map integrates power noncoherently over Doppler;
    with the rectangular chirp window that equals the chirp-axis power sum
    (Parseval), so the full Doppler cube is never materialized. Doppler
    spectra are computed only at each frame's detected cells, which is
    exactly where the displacement matrix can be non-zero.
    """
    per_frame_cells: list[list[tuple[int, int]]] = []
    per_frame_maps: list[np.ndarray] = []
    frame_values: list[dict[tuple[int, int], float]] = []
    frame_detections = []
    power_sum = None
    n_frames = 0
    cfar = fit_cfar_params(
        pipeline.cfar, (config.adc_samples_per_chirp, config.azimuth_fft_size)
    )
    n_az = config.azimuth_fft_size
    for f, frame in enumerate(frames):
        x = range_fft(frame)                                   # (chirp, ant, range)
        x = azimuth_fft(x, n_az, axis=1)                       # azimuth bins in raw FFT order
        power = np.einsum("kas,kas->as", x, x.conj()).real     # Doppler-integrated
        power = np.fft.fftshift(power, axes=0)                 # ascending azimuth
        ra_db = 10.0 * np.log10(np.maximum(power.T, 10.0 ** (DB_FLOOR / 10.0)))
        cells = detect_cells(ra_db, cfar)
        per_frame_cells.append(cells)
        per_frame_maps.append(ra_db)
        frame_detections.extend((f, rb, ab, float(ra_db[rb, ab])) for rb, ab in cells)

        values: dict[tuple[int, int], float] = {}
        if cells:
            rb = np.array([c[0] for c in cells])
            ab = np.array([c[1] for c in cells])
            ab_raw = (ab + n_az // 2) % n_az                   # undo the fftshift
            zero_p, best_p, best_v = cell_doppler_bins(x[:, ab_raw, rb], config)
            d = displacement_from_bins(
                zero_p, best_p, best_v, config.frame_time, pipeline.zero_margin_db
            )
            values = {cell: float(v) for cell, v in zip(cells, d)}
        frame_values.append(values)

        power_sum = power.T if power_sum is None else power_sum + power.T
        n_frames += 1

    if n_frames == 0:
        raise ValueError("recording contains no frames")
    points, detected = merge_detections(
        per_frame_cells, per_frame_maps, range_axis(config), azimuth_axis(config)
    )
    displacement = np.zeros((len(points), n_frames))
    for i, point in enumerate(points):
        for f in np.flatnonzero(detected[i]):
            displacement[i, f] = frame_values[f].get(point.cell, 0.0)
    micromotion = MicroMotionMatrix(
        points=points, displacement=displacement, frame_period=config.frame_period
    )
    mean_map_db = 10.0 * np.log10(np.maximum(power_sum / n_frames, 1e-12))
    return ProcessResult(
        config=config,
        points=points,
        detected=detected,
        micromotion=micromotion,
        mean_map_db=mean_map_db,
        frame_detections=frame_detections,
    )


def extract_breathing(
    result: ProcessResult, pipeline: PipelineConfig = PipelineConfig()
) -> tuple[MicroMotionMatrix, list, list[BreathingSource]]:
    """Validity filtering, iterative ICA, and breathing selection."""
    valid = remove_invalid_signals(result.micromotion, pipeline.min_nonzero_fraction)
    if valid.n_points == 0:
        return valid, [], []
    sources = iterative_ica(
        valid, n=pipeline.ica_runs, seed=pipeline.seed, rank_floor=pipeline.ica_rank_floor
    )
    breathing = filter_breathing(
        sources,
        result.config.frame_rate,
        band_low_hz=pipeline.band_low_hz,
        band_high_hz=pipeline.band_high_hz,
        min_quality=pipeline.min_quality,
    )
    return valid, sources, breathing


def _estimate_from_profile(
    profile: SpatialBreathingProfile, pipeline: PipelineConfig
) -> CountEstimate:
    if pipeline.estimator == "clustering":
        return count_by_clustering(profile, k_max=pipeline.k_max, seed=pipeline.seed)
    if pipeline.estimator == "classifier":
        if pipeline.model_path is None:
            raise ModelRequiredError(
                "classifier estimator needs --model; use the clustering estimator otherwise"
            )
        from .attention import AttentionClassifier

        model = AttentionClassifier.load(pipeline.model_path)
        return count_by_classifier(profile, model, seed=pipeline.seed)
    raise ValueError(f"unknown estimator {pipeline.estimator!r}")


def count_profile(
    profile: SpatialBreathingProfile, pipeline: PipelineConfig = PipelineConfig()
) -> CountResult:
    estimate = _estimate_from_profile(profile, pipeline)
    return CountResult(
        estimate=estimate,
        n_breathing_sources=profile.n_components,
        n_valid_points=profile.n_bins,
        profile=profile,
    )


def count_frames(
    frames,
    config: RadarConfig,
    pipeline: PipelineConfig = PipelineConfig(),
) -> CountResult:
    """The fused path: raw frames in, person-count estimate out."""
    result = process_frames(frames, config, pipeline)
    valid, sources, breathing = extract_breathing(result, pipeline)
    profile = build_profile(breathing, valid.points)
    if profile.n_components == 0:
        method = (
            "clustering" if pipeline.estimator == "clustering" else "attention-classifier"
        )
        estimate = CountEstimate(count=0, method=method, votes={0: 10})
    else:
        estimate = _estimate_from_profile(profile, pipeline)
    return CountResult(
        estimate=estimate,
        n_points=len(result.points),
        n_valid_points=valid.n_points,
        n_sources=len(sources),
        n_breathing_sources=len(breathing),
        profile=profile,
        breathing_sources=breathing,
        valid_motion=valid,
    )


def write_point_cloud_csv(result: ProcessResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["frame", "range_bin", "azimuth_bin", "range_m", "azimuth_deg", "power_db"]
        )
        ranges = range_axis(result.config)
        azimuths = azimuth_axis(result.config)
        for f, rb, ab, power in result.frame_detections:
            writer.writerow(
                [f, rb, ab, f"{ranges[rb]:.4f}", f"{azimuths[ab]:.3f}", f"{power:.3f}"]
            )


def write_map_pgm(map_db: np.ndarray, path, db_range: float = 80.0) -> None:
    """16-bit PGM of a dB map, clipped to the top db_range dB."""
    top = float(map_db.max())
    scaled = np.clip((map_db - (top - db_range)) / db_range, 0.0, 1.0)
    pixels = (scaled * 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{map_db.shape[1]} {map_db.shape[0]}\n65535\n".encode("ascii"))
        fh.write(pixels.tobytes())


def write_map_csv(map_db: np.ndarray, path) -> None:
    np.savetxt(path, map_db, delimiter=",", fmt="%.3f")
