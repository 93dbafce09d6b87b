"""Scene descriptions: stationary breathing persons in the radar field of view."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .config import RadarConfig


class SceneError(ValueError):
    """Scene violates the simulator's preconditions."""


@dataclass(frozen=True)
class Person:
    """A stationary person modeled as a single torso scatterer.

    Coordinates are radar-centric ground plane: x is downrange along
    boresight, y is cross-range (positive to the left). Breathing moves the
    scatterer along the radar line of sight; sway moves it laterally.
    facing=0 means chest toward the radar; other angles attenuate the
    effective breathing amplitude by max(cos(facing), 0.2).
    """

    x: float
    y: float
    breathing_hz: float
    breathing_amplitude: float
    sway_amplitude: float = 0.0
    sway_hz: float = 0.0
    rcs: float = 1.0
    facing: float = 0.0

    @property
    def range_m(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def azimuth_deg(self) -> float:
        return math.degrees(math.atan2(self.y, self.x))

    @property
    def effective_breathing_amplitude(self) -> float:
        return self.breathing_amplitude * max(math.cos(math.radians(self.facing)), 0.2)


@dataclass(frozen=True)
class GhostSpec:
    """First-order multipath: persons mirrored across a vertical plane.

    The plane contains the radar and points along `mirror_azimuth_deg`;
    each person contributes a ghost scatterer at the mirrored position with
    reflectivity scaled by gain**2 (two-way bounce).
    """

    gain: float
    mirror_azimuth_deg: float

    def __post_init__(self):
        if not 0.0 <= self.gain <= 1.0:
            raise SceneError(f"multipath gain must be in [0, 1], got {self.gain}")


@dataclass(frozen=True)
class Scene:
    persons: tuple[Person, ...] = ()
    noise_floor_db: float | None = None
    multipath: GhostSpec | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))


@dataclass
class SceneWarnings:
    """Non-fatal conditions recorded in recording metadata."""

    aliased_breathing: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"aliased_breathing": list(self.aliased_breathing)}


def validate_scene(scene: Scene, config: RadarConfig) -> SceneWarnings:
    """Check FoV/physiology invariants; raise SceneError on violations.

    Returns warnings for breathing rates at or above the frame Nyquist rate
    (the signal will alias but simulation proceeds).
    """
    warnings = SceneWarnings()
    nyquist = config.frame_rate / 2.0
    for i, p in enumerate(scene.persons):
        r = p.range_m
        if not (0.0 < r < config.max_range):
            raise SceneError(
                f"person {i} at (x={p.x:.3f}, y={p.y:.3f}) has range "
                f"{r:.3f} m outside (0, {config.max_range:.3f})"
            )
        if abs(p.azimuth_deg) > config.azimuth_fov:
            raise SceneError(
                f"person {i} at (x={p.x:.3f}, y={p.y:.3f}) has azimuth "
                f"{p.azimuth_deg:.2f} deg outside +/-{config.azimuth_fov} deg"
            )
        if p.breathing_hz < 0 or p.breathing_amplitude < 0:
            raise SceneError(f"person {i} has negative breathing parameters")
        if p.breathing_amplitude > 0.02:
            raise SceneError(
                f"person {i} breathing amplitude {p.breathing_amplitude} m "
                "exceeds the 0.02 m physiological bound"
            )
        if p.rcs < 0:
            raise SceneError(f"person {i} has negative rcs")
        if p.breathing_hz >= nyquist:
            warnings.aliased_breathing.append(i)
    return warnings


def scene_to_dict(scene: Scene) -> dict:
    d = {
        "persons": [
            {
                "x": p.x,
                "y": p.y,
                "breathing_hz": p.breathing_hz,
                "breathing_amplitude": p.breathing_amplitude,
                "sway_amplitude": p.sway_amplitude,
                "sway_hz": p.sway_hz,
                "rcs": p.rcs,
                "facing": p.facing,
            }
            for p in scene.persons
        ],
        "noise_floor_db": scene.noise_floor_db,
        "multipath": None,
        "seed": scene.seed,
    }
    if scene.multipath is not None:
        d["multipath"] = {
            "gain": scene.multipath.gain,
            "mirror_azimuth_deg": scene.multipath.mirror_azimuth_deg,
        }
    return d


def scene_from_dict(d: dict) -> Scene:
    try:
        persons = tuple(Person(**p) for p in d.get("persons", []))
        multipath = d.get("multipath")
        ghost = GhostSpec(**multipath) if multipath else None
        return Scene(
            persons=persons,
            noise_floor_db=d.get("noise_floor_db"),
            multipath=ghost,
            seed=int(d.get("seed", 0)),
        )
    except TypeError as exc:
        raise SceneError(f"bad scene field: {exc}") from exc


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return scene_from_dict(json.load(fh))


def save_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2, sort_keys=True)
        fh.write("\n")


def scene_hash(scene: Scene) -> str:
    """Stable content hash of the scene, recorded in recording headers."""
    payload = json.dumps(scene_to_dict(scene), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()
