"""Radar configuration and derived resolution math."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class ConfigError(ValueError):
    """Invalid or inconsistent radar configuration."""


@dataclass(frozen=True)
class RadarConfig:
    """Chirp/frame/antenna parameters of an FMCW radar.

    The virtual antenna array is modeled as a uniform linear array along
    azimuth with half-wavelength spacing; elevation is not modeled.

    Attributes:
        center_frequency: carrier center frequency [Hz]
        chirp_bandwidth: swept bandwidth per chirp [Hz]
        chirps_per_frame: chirps transmitted back-to-back within a frame
        adc_samples_per_chirp: complex baseband samples per chirp
        frame_time: active chirping duration of one frame [s]
        frame_rate: frame repetition rate [Hz]
        frame_count: frames per recording
        virtual_antennas: azimuth virtual array size
        azimuth_fov: one-sided field of view [deg]
        wavelength: carrier wavelength [m]; derived from center_frequency
            when omitted, validated to 0.5% when given explicitly
    """

    center_frequency: float
    chirp_bandwidth: float
    chirps_per_frame: int
    adc_samples_per_chirp: int
    frame_time: float
    frame_rate: float
    frame_count: int
    virtual_antennas: int
    azimuth_fov: float = 70.0
    wavelength: float | None = None

    def __post_init__(self):
        for name in (
            "center_frequency",
            "chirp_bandwidth",
            "chirps_per_frame",
            "adc_samples_per_chirp",
            "frame_time",
            "frame_rate",
            "frame_count",
            "virtual_antennas",
            "azimuth_fov",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        derived = SPEED_OF_LIGHT / self.center_frequency
        if self.wavelength is None:
            object.__setattr__(self, "wavelength", derived)
        elif abs(self.wavelength - derived) > 0.005 * derived:
            raise ConfigError(
                f"wavelength {self.wavelength} inconsistent with "
                f"center frequency (expected ~{derived:.6g} m)"
            )
        if self.frame_time > 1.0 / self.frame_rate + 1e-12:
            raise ConfigError(
                f"frame_time {self.frame_time} exceeds frame period "
                f"{1.0 / self.frame_rate}"
            )

    @property
    def range_resolution(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.chirp_bandwidth)

    @property
    def max_range(self) -> float:
        return self.adc_samples_per_chirp * self.range_resolution

    @property
    def chirp_time(self) -> float:
        return self.frame_time / self.chirps_per_frame

    @property
    def velocity_resolution(self) -> float:
        return self.wavelength / (2.0 * self.chirps_per_frame * self.chirp_time)

    @property
    def max_velocity(self) -> float:
        return self.wavelength / (4.0 * self.chirp_time)

    @property
    def frame_period(self) -> float:
        """Sampling interval of the per-frame displacement series [s]."""
        return 1.0 / self.frame_rate

    @property
    def azimuth_fft_size(self) -> int:
        """Next power of two >= virtual_antennas."""
        n = 1
        while n < self.virtual_antennas:
            n *= 2
        return n

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RadarConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in fields})


def derived_resolutions(config: RadarConfig) -> dict:
    """Resolution and unambiguous-extent figures implied by the chirp timing.

    range_resolution = c / (2 B), max_range = N_s * range_resolution,
    velocity_resolution = wavelength / (2 N_c T_c), max_velocity = wavelength / (4 T_c)
    with T_c the single-chirp duration frame_time / chirps_per_frame.
    """
    return {
        "range_resolution": config.range_resolution,
        "max_range": config.max_range,
        "velocity_resolution": config.velocity_resolution,
        "max_velocity": config.max_velocity,
    }


# Stock presets: the cascaded-imaging-radar configuration and a 12-antenna
# single-chip variant used for the antenna-resolution comparison.
FULL_PRESET = RadarConfig(
    center_frequency=79.13e9,
    chirp_bandwidth=3.56e9,
    chirps_per_frame=128,
    adc_samples_per_chirp=256,
    frame_time=0.089,
    frame_rate=2.0,
    frame_count=60,
    virtual_antennas=192,
    azimuth_fov=70.0,
)

LOWRES_PRESET = dataclasses.replace(FULL_PRESET, virtual_antennas=12)

PRESETS = {
    "full": FULL_PRESET,
    "lowres": LOWRES_PRESET,
}
