"""Iterative source separation and breathing-signal selection.

The number of independent micro-motion sources is unknown, so ICA runs
repeatedly with the component count stepping 1..n; every extracted
component is kept as a candidate, at most n*(n+1)/2 in total. A candidate
counts as breathing when the power-weighted mean frequency of its spectrum
falls inside the breathing band and the peak bin carries at least the
required fraction of total power.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .fastica import DEFAULT_MAX_ITER, DEFAULT_TOL, RankDeficientError, fast_ica
from .micromotion import MicroMotionMatrix

logger = logging.getLogger(__name__)

DEFAULT_ICA_RUNS = 10
DEFAULT_BAND_LOW_HZ = 0.1
DEFAULT_BAND_HIGH_HZ = 0.6
DEFAULT_MIN_QUALITY = 0.2
# Micro-displacements are quantized to velocity-bin steps, which smears a
# broad carpet of low-variance directions across the row space. Directions
# below this fraction of the leading variance are quantization residue,
# not candidate sources, so runs that would have to whiten into them are
# treated as rank deficient.
DEFAULT_RANK_FLOOR = 0.18

_ICA_STREAM = 0x69636173


@dataclass
class MicroSource:
    """One separated component: unit-variance time series plus its mixing column."""

    signal: np.ndarray           # (n_frames,), zero mean, unit variance
    mixing_weights: np.ndarray   # (n_points,), signed contribution per radar point
    ica_iteration: int           # component count of the run that produced it


@dataclass
class SpectrumStats:
    mean_frequency: float        # power-weighted mean over non-DC positive bins [Hz]
    quality: float               # peak bin power / total power
    spectrum: np.ndarray         # power per bin
    frequencies: np.ndarray      # bin centers [Hz]


@dataclass
class BreathingSource(MicroSource):
    mean_frequency: float = math.nan
    quality: float = 0.0
    spectrum: np.ndarray | None = None
    frequencies: np.ndarray | None = None


def iterative_ica(
    matrix: MicroMotionMatrix | np.ndarray,
    n: int = DEFAULT_ICA_RUNS,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    rank_floor: float = DEFAULT_RANK_FLOOR,
) -> list[MicroSource]:
    """All components from ICA runs with 1..n components on the displacement rows.

    Runs requesting more components than there are rows (or than the data
    rank supports) are skipped; non-converged runs are dropped and logged.
    Deterministic for a fixed seed: run i uses RNG substream (seed, i).
    """
    x = matrix.displacement if isinstance(matrix, MicroMotionMatrix) else np.asarray(matrix)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("micro-motion matrix must have at least one row")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")

    sources: list[MicroSource] = []
    for i in range(1, n + 1):
        if i > x.shape[0]:
            continue
        rng = np.random.default_rng([seed, i, _ICA_STREAM])
        try:
            result = fast_ica(x, i, rng, tol=tol, max_iter=max_iter, rank_floor=rank_floor)
        except RankDeficientError as exc:
            logger.info("ICA run i=%d skipped: %s", i, exc)
            continue
        if not result.converged:
            logger.warning("ICA run i=%d did not converge; dropping its components", i)
            continue
        for c in range(i):
            sources.append(
                MicroSource(
                    signal=result.sources[c].copy(),
                    mixing_weights=result.mixing[:, c].copy(),
                    ica_iteration=i,
                )
            )
    return sources


def spectrum_stats(signal: np.ndarray, frame_rate: float) -> SpectrumStats:
    """Mean frequency and peak-power fraction over the non-DC positive spectrum."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size < 8:
        raise ValueError(f"signal too short for spectral stats ({signal.size} < 8 samples)")
    spectrum = np.abs(np.fft.rfft(signal)) ** 2
    freqs = np.fft.rfftfreq(signal.size, d=1.0 / frame_rate)
    spectrum = spectrum[1:]   # exclude DC so slow drift cannot dominate
    freqs = freqs[1:]
    total = float(spectrum.sum())
    if total <= 0.0:
        return SpectrumStats(math.nan, 0.0, spectrum, freqs)
    mean_frequency = float((spectrum * freqs).sum() / total)
    quality = float(spectrum.max() / total)
    return SpectrumStats(mean_frequency, quality, spectrum, freqs)


def filter_breathing(
    sources: list[MicroSource],
    frame_rate: float,
    band_low_hz: float = DEFAULT_BAND_LOW_HZ,
    band_high_hz: float = DEFAULT_BAND_HIGH_HZ,
    min_quality: float = DEFAULT_MIN_QUALITY,
) -> list[BreathingSource]:
    """Keep sources whose mean frequency is in-band and whose quality passes.

    An empty result is the zero-breather outcome and propagates to the
    counting stage as count 0.
    """
    if not 0.0 < band_low_hz < band_high_hz < frame_rate / 2.0 + 1e-12:
        raise ValueError(
            f"need 0 < band_low ({band_low_hz}) < band_high ({band_high_hz}) "
            f"< frame Nyquist ({frame_rate / 2.0})"
        )
    if not 0.0 <= min_quality < 1.0:
        raise ValueError(f"min_quality must be in [0, 1), got {min_quality}")

    kept: list[BreathingSource] = []
    for src in sources:
        stats = spectrum_stats(src.signal, frame_rate)
        if math.isnan(stats.mean_frequency):
            continue
        if not band_low_hz <= stats.mean_frequency <= band_high_hz:
            continue
        if stats.quality < min_quality:
            continue
        kept.append(
            BreathingSource(
                signal=src.signal,
                mixing_weights=src.mixing_weights,
                ica_iteration=src.ica_iteration,
                mean_frequency=stats.mean_frequency,
                quality=stats.quality,
                spectrum=stats.spectrum,
                frequencies=stats.frequencies,
            )
        )
    return kept


def export_sources(sources: list[BreathingSource], points, out_dir) -> None:
    """One CSV per source (time series) plus a JSON sidecar of its stats."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for idx, src in enumerate(sources):
        with open(out / f"source_{idx:03d}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "value"])
            for j, v in enumerate(src.signal):
                writer.writerow([j, f"{v:.9e}"])
        sidecar = {
            "mean_frequency_hz": src.mean_frequency,
            "quality": src.quality,
            "ica_iteration": src.ica_iteration,
            "mixing_weights": {
                f"{p.range_bin}:{p.azimuth_bin}": float(w)
                for p, w in zip(points, src.mixing_weights)
            },
        }
        with open(out / f"source_{idx:03d}.json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
