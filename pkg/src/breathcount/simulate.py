"""Synthetic FMCW IQ generation for scenes of stationary breathing persons.

The signal model is a dechirped point-scatterer sum. For a scatterer at
instantaneous radial range R, each (chirp k, antenna a, sample s) gets

    amp * exp(j*(2*pi*(R/dr)*s/Ns - 4*pi*R_k/wavelength + pi*a*sin(azimuth)))

i.e. a beat frequency proportional to range across samples, the carrier
phase history across chirps (which carries Doppler), and a linear phase
across the half-wavelength-spaced virtual antennas. Amplitude follows the
two-way radar equation, sqrt(rcs)/R**2, referenced to a unit reflector at
1 m. Complex white Gaussian noise is added per sample at the scene's
noise floor (dB relative to that reference).

Frames are synthesized independently so recordings can be streamed; the
noise RNG substream for frame f is derived from (seed, f), making serial
and parallel synthesis bit-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .config import RadarConfig
from .scene import Person, Scene, SceneWarnings, validate_scene

_NOISE_STREAM = 0x6E6F6973  # distinguishes noise draws from other substreams


@dataclass(frozen=True)
class _Scatterer:
    x: float
    y: float
    breathing_hz: float
    breathing_amplitude: float
    sway_amplitude: float
    sway_hz: float
    sway_phase: float
    amplitude_scale: float


def _person_sway_phase(person: Person, seed: int) -> float:
    """Deterministic per-person sway phase.

    Hashing the person's own fields (not its index) keeps the cube of a
    combined scene equal to the sum of the cubes of its parts.
    """
    payload = json.dumps(
        [
            seed,
            person.x,
            person.y,
            person.breathing_hz,
            person.breathing_amplitude,
            person.sway_amplitude,
            person.sway_hz,
            person.rcs,
            person.facing,
        ],
        sort_keys=True,
    ).encode()
    digest = hashlib.sha256(payload).digest()
    return (int.from_bytes(digest[:8], "little") / 2**64) * 2.0 * math.pi


def _mirror_position(x: float, y: float, mirror_azimuth_deg: float) -> tuple[float, float]:
    """Reflect a ground-plane point across the line through the radar at the given azimuth."""
    phi = math.radians(mirror_azimuth_deg)
    # Azimuth is measured from the +x (boresight) axis toward +y.
    c, s = math.cos(2 * phi), math.sin(2 * phi)
    return c * x + s * y, s * x - c * y


def _build_scatterers(scene: Scene, static_body_fraction: float) -> list[_Scatterer]:
    scatterers: list[_Scatterer] = []

    def add(x, y, person: Person, gain: float):
        sway_phase = _person_sway_phase(person, scene.seed)
        scatterers.append(
            _Scatterer(
                x=x,
                y=y,
                breathing_hz=person.breathing_hz,
                breathing_amplitude=person.effective_breathing_amplitude,
                sway_amplitude=person.sway_amplitude,
                sway_hz=person.sway_hz,
                sway_phase=sway_phase,
                amplitude_scale=gain * math.sqrt(person.rcs),
            )
        )
        if static_body_fraction > 0.0:
            scatterers.append(
                _Scatterer(
                    x=x,
                    y=y,
                    breathing_hz=0.0,
                    breathing_amplitude=0.0,
                    sway_amplitude=person.sway_amplitude,
                    sway_hz=person.sway_hz,
                    sway_phase=sway_phase,
                    amplitude_scale=gain * math.sqrt(person.rcs * static_body_fraction),
                )
            )

    for person in scene.persons:
        add(person.x, person.y, person, gain=1.0)
        if scene.multipath is not None and scene.multipath.gain > 0.0:
            gx, gy = _mirror_position(person.x, person.y, scene.multipath.mirror_azimuth_deg)
            add(gx, gy, person, gain=scene.multipath.gain**2)
    return scatterers


def synthesize_frame(
    config: RadarConfig,
    scene: Scene,
    frame_index: int,
    static_body_fraction: float = 0.0,
) -> np.ndarray:
    """One IQ frame, shape (chirps, antennas, samples), complex64."""
    n_chirps = config.chirps_per_frame
    n_ant = config.virtual_antennas
    n_samples = config.adc_samples_per_chirp

    t_chirps = frame_index / config.frame_rate + (np.arange(n_chirps) + 0.5) * config.chirp_time
    ant_idx = np.arange(n_ant)
    sample_idx = np.arange(n_samples)
    dr = config.range_resolution

    # One (chirp*antenna) x samples product per frame: left factors hold the
    # chirp-phase history and antenna steering per scatterer, right factors
    # the beat-frequency ramp. BLAS does the rank-n_scatterer expansion.
    lefts, rights = [], []
    for sc in _build_scatterers(scene, static_body_fraction):
        base_r = math.hypot(sc.x, sc.y)
        if base_r == 0.0:
            continue
        # Lateral sway perpendicular to the line of sight, in the ground plane.
        ux, uy = sc.x / base_r, sc.y / base_r
        sway = sc.sway_amplitude * np.sin(2 * np.pi * sc.sway_hz * t_chirps + sc.sway_phase)
        px = sc.x - uy * sway
        py = sc.y + ux * sway
        chest = sc.breathing_amplitude * np.sin(2 * np.pi * sc.breathing_hz * t_chirps)
        r_chirps = np.hypot(px, py) + chest

        mid = n_chirps // 2
        r_center = float(r_chirps[mid])
        sin_az = float(py[mid] / math.hypot(px[mid], py[mid]))
        amp = sc.amplitude_scale / r_center**2

        carrier = np.exp(-1j * 4 * np.pi / config.wavelength * r_chirps)
        steering = np.exp(1j * np.pi * ant_idx * sin_az)
        beat = np.exp(1j * 2 * np.pi * (r_center / dr) * sample_idx / n_samples)
        lefts.append((amp * np.outer(carrier, steering).reshape(-1)).astype(np.complex64))
        rights.append(beat.astype(np.complex64))

    if lefts:
        frame = (np.stack(lefts, axis=1) @ np.stack(rights, axis=0)).reshape(
            n_chirps, n_ant, n_samples
        )
    else:
        frame = np.zeros((n_chirps, n_ant, n_samples), dtype=np.complex64)

    if scene.noise_floor_db is not None and np.isfinite(scene.noise_floor_db):
        sigma = np.float32(math.sqrt(10.0 ** (scene.noise_floor_db / 10.0) / 2.0))
        # SFC64 keyed by (seed, frame): parallel frame synthesis stays
        # bit-identical to serial.
        rng = np.random.Generator(
            np.random.SFC64(np.random.SeedSequence([scene.seed, frame_index, _NOISE_STREAM]))
        )
        noise = rng.standard_normal((n_chirps, n_ant, n_samples, 2), dtype=np.float32)
        cnoise = noise.view(np.complex64)[..., 0]   # interleaved (I, Q) pairs
        np.multiply(cnoise, sigma, out=cnoise)
        frame = frame + cnoise
    return frame


def iter_frames(
    config: RadarConfig,
    scene: Scene,
    static_body_fraction: float = 0.0,
) -> Iterator[np.ndarray]:
    """Stream the recording frame by frame (validates the scene first)."""
    validate_scene(scene, config)
    for f in range(config.frame_count):
        yield synthesize_frame(config, scene, f, static_body_fraction)


def simulate(
    config: RadarConfig,
    scene: Scene,
    static_body_fraction: float = 0.0,
) -> tuple[np.ndarray, SceneWarnings]:
    """Materialize the full IQ cube (frame, chirp, antenna, sample).

    Convenient for tests and the low-resolution preset; a full-preset cube
    is ~3 GB, so large recordings should go through iter_frames/mmcr
    streaming instead.
    """
    warnings = validate_scene(scene, config)
    cube = np.stack(
        [
            synthesize_frame(config, scene, f, static_body_fraction)
            for f in range(config.frame_count)
        ]
    )
    return cube, warnings


def chest_waveform(person: Person, config: RadarConfig) -> np.ndarray:
    """Ground-truth chest displacement sampled at the frame rate [m].

    Independent reference for spectral checks of recovered micro-motion.
    """
    t = np.arange(config.frame_count) / config.frame_rate
    return person.effective_breathing_amplitude * np.sin(2 * np.pi * person.breathing_hz * t)
