"""breathcount: counting stationary people from FMCW radar micro-motion.

Pipeline stages, each usable on its own:
    simulate  synthetic IQ recordings of breathing persons
    dsp/cfar  range-Doppler-azimuth FFTs and CA-CFAR point detection
    micromotion  per-point displacement time series
    fastica/breathing  iterative source separation and breathing selection
    profiles/counting  spatial breathing profiles and count estimation
    metrics   evaluation reports
"""

from .attention import AttentionClassifier, ModelShape
from .breathing import (
    BreathingSource,
    MicroSource,
    filter_breathing,
    iterative_ica,
    spectrum_stats,
)
from .cfar import CfarParams, RadarPoint, ca_cfar_mask, detect_cells
from .config import (
    FULL_PRESET,
    LOWRES_PRESET,
    PRESETS,
    ConfigError,
    RadarConfig,
    derived_resolutions,
)
from .counting import CountEstimate, count_by_classifier, count_by_clustering
from .dsp import FrameSpectra, range_doppler_azimuth_fft
from .fastica import FastIcaResult, fast_ica
from .metrics import counting_errors, evaluate, regression_to_class, weighted_metrics
from .micromotion import (
    MicroMotionMatrix,
    estimate_micro_displacement,
    remove_invalid_signals,
)
from .mmcr import MmcrReader, MmcrWriter
from .pipeline import CountResult, PipelineConfig, count_frames, process_frames
from .profiles import SpatialBreathingProfile, augment_profile, build_profile
from .scene import GhostSpec, Person, Scene, SceneError, validate_scene
from .simulate import chest_waveform, simulate, synthesize_frame
from .training import TrainConfig, train_classifier

__version__ = "0.1.0"

__all__ = [
    "AttentionClassifier",
    "BreathingSource",
    "CfarParams",
    "ConfigError",
    "CountEstimate",
    "CountResult",
    "FULL_PRESET",
    "FastIcaResult",
    "FrameSpectra",
    "GhostSpec",
    "LOWRES_PRESET",
    "MicroMotionMatrix",
    "MicroSource",
    "MmcrReader",
    "MmcrWriter",
    "ModelShape",
    "PRESETS",
    "Person",
    "PipelineConfig",
    "RadarConfig",
    "RadarPoint",
    "Scene",
    "SceneError",
    "SpatialBreathingProfile",
    "TrainConfig",
    "augment_profile",
    "build_profile",
    "ca_cfar_mask",
    "chest_waveform",
    "count_by_classifier",
    "count_by_clustering",
    "count_frames",
    "counting_errors",
    "derived_resolutions",
    "detect_cells",
    "estimate_micro_displacement",
    "evaluate",
    "fast_ica",
    "filter_breathing",
    "iterative_ica",
    "process_frames",
    "range_doppler_azimuth_fft",
    "regression_to_class",
    "remove_invalid_signals",
    "simulate",
    "spectrum_stats",
    "synthesize_frame",
    "train_classifier",
    "validate_scene",
    "weighted_metrics",
]
