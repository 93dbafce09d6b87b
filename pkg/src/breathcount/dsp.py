"""Range-Doppler-azimuth FFT cascade over IQ frames.

Windowing: Hann over samples (range) and over the physical antennas
(azimuth), rectangular over chirps so the Doppler peak bin stays sharp for
the displacement estimate. All FFTs are unitary (1/sqrt(N) scaling), so a
rectangular-window stage preserves total power exactly (Parseval).

Axis conventions of the per-frame output cube (doppler, azimuth, range):
    doppler  ascending radial velocity, positive = moving away from radar
    azimuth  ascending angle, arcsin-spaced bins over +/-90 deg
    range    0 .. max_range in steps of range_resolution
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .config import RadarConfig

DB_FLOOR = -120.0
_FFT_WORKERS = -1  # all cores; per-frame results do not depend on worker count


class DimensionError(ValueError):
    """Frame dimensions do not match the radar configuration."""


def _window(kind: str, n: int) -> np.ndarray:
    if kind == "hann":
        return np.hanning(n)
    if kind == "rect":
        return np.ones(n)
    raise ValueError(f"unknown window {kind!r}")


def _windowed_fft(x: np.ndarray, window: str, axis: int, fft_size: int | None = None) -> np.ndarray:
    """Unitary FFT along one axis; computes in the input's complex precision."""
    n = x.shape[axis]
    size = fft_size if fft_size is not None else n
    w = _window(window, n)
    shape = [1] * x.ndim
    shape[axis] = n
    if x.dtype == np.complex64:
        w = w.astype(np.float32)
    out = sfft.fft(x * w.reshape(shape), n=size, axis=axis, workers=_FFT_WORKERS)
    out /= np.sqrt(size).astype(out.real.dtype)
    return out


def range_fft(frame: np.ndarray, window: str = "hann") -> np.ndarray:
    """Unitary FFT over the sample axis (last); no zero padding."""
    return _windowed_fft(frame, window, axis=-1)


def doppler_fft(x: np.ndarray, window: str = "rect", axis: int = 0) -> np.ndarray:
    return _windowed_fft(x, window, axis=axis)


def azimuth_fft(x: np.ndarray, fft_size: int, window: str = "hann", axis: int = 1) -> np.ndarray:
    return _windowed_fft(x, window, axis=axis, fft_size=fft_size)


def velocity_axis(config: RadarConfig) -> np.ndarray:
    """Ascending velocity per Doppler bin [m/s], positive = receding."""
    freqs = np.fft.fftshift(np.fft.fftfreq(config.chirps_per_frame))  # cycles/chirp
    v = -freqs * config.wavelength / (2.0 * config.chirp_time)
    return v[::-1].copy()


def azimuth_axis(config: RadarConfig) -> np.ndarray:
    """Azimuth angle per bin [deg] after fftshift of the azimuth FFT."""
    n = config.azimuth_fft_size
    sin_theta = 2.0 * np.fft.fftshift(np.fft.fftfreq(n))
    return np.degrees(np.arcsin(np.clip(sin_theta, -1.0, 1.0)))


def range_axis(config: RadarConfig) -> np.ndarray:
    return np.arange(config.adc_samples_per_chirp) * config.range_resolution


@dataclass
class FrameSpectra:
    """Per-frame FFT products.

    doppler_cube: complex (doppler_bins, azimuth_bins, range_bins)
    range_azimuth_db: float (range_bins, azimuth_bins), noncoherent
        integration of |doppler_cube|**2 over Doppler, in dB with a
        -120 dB floor
    """

    frame_index: int
    doppler_cube: np.ndarray
    range_azimuth_db: np.ndarray
    velocities: np.ndarray
    ranges: np.ndarray
    azimuths: np.ndarray

    @property
    def zero_velocity_bin(self) -> int:
        return int(np.argmin(np.abs(self.velocities)))


def range_doppler_azimuth_fft(
    frame: np.ndarray,
    config: RadarConfig,
    frame_index: int = 0,
    range_window: str = "hann",
    azimuth_window: str = "hann",
    doppler_window: str = "rect",
) -> FrameSpectra:
    """FFT over samples, chirps, and antennas of one (chirp, antenna, sample) frame."""
    expected = (config.chirps_per_frame, config.virtual_antennas, config.adc_samples_per_chirp)
    if frame.shape != expected:
        raise DimensionError(f"frame shape {frame.shape} does not match config {expected}")

    x = frame if np.iscomplexobj(frame) else frame.astype(np.complex128)
    x = range_fft(x, window=range_window)                     # (chirp, ant, range)
    x = doppler_fft(x, window=doppler_window, axis=0)         # (doppler, ant, range)
    x = np.fft.fftshift(x, axes=0)[::-1]                      # ascending receding-positive velocity
    x = azimuth_fft(x, config.azimuth_fft_size, window=azimuth_window, axis=1)
    x = np.fft.fftshift(x, axes=1)                            # ascending azimuth

    power = np.sum(np.abs(x) ** 2, axis=0, dtype=np.float64)  # (azimuth, range)
    ra_db = 10.0 * np.log10(np.maximum(power.T, 10.0 ** (DB_FLOOR / 10.0)))
    return FrameSpectra(
        frame_index=frame_index,
        doppler_cube=x,
        range_azimuth_db=ra_db,
        velocities=velocity_axis(config),
        ranges=range_axis(config),
        azimuths=azimuth_axis(config),
    )
