"""Training loop for the attention count classifier.

Plain SGD with momentum on cross-entropy loss; the checkpoint kept is the
one with the best validation macro F1. Deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attention import CLASSES, AttentionClassifier, ModelShape
from .metrics import macro_f1
from .profiles import SpatialBreathingProfile, rasterize_profile, read_profile_csv

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 16
    learning_rate: float = 0.02
    momentum: float = 0.9
    grad_clip: float = 1.0   # global gradient norm; <= 0 disables clipping
    seed: int = 0
    shape: ModelShape = field(default_factory=ModelShape)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    valid_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_f1: float = 0.0


def _as_raster(item) -> np.ndarray:
    if isinstance(item, SpatialBreathingProfile):
        return rasterize_profile(item)
    return np.asarray(item, dtype=np.float64)


def train_classifier(
    train_set: list[tuple],
    valid_set: list[tuple],
    config: TrainConfig = TrainConfig(),
    model_path=None,
) -> tuple[AttentionClassifier, TrainHistory]:
    """Fit the classifier on labeled (profile-or-raster, label) pairs.

    Every class in CLASSES must appear in the training set; training is
    refused otherwise since the head would never learn the missing logit.
    """
    labels = np.array([int(lab) for _, lab in train_set])
    present = set(labels.tolist())
    missing = [c for c in CLASSES if c not in present]
    if missing:
        raise ValueError(f"training refused: classes {missing} absent from dataset")
    if not valid_set:
        raise ValueError("a non-empty validation set is required for model selection")

    x_train = np.stack([_as_raster(item) for item, _ in train_set])
    y_train = labels
    x_valid = np.stack([_as_raster(item) for item, _ in valid_set])
    y_valid = np.array([int(lab) for _, lab in valid_set])

    model = AttentionClassifier(shape=config.shape, seed=config.seed)
    velocity = {name: np.zeros_like(p) for name, p in model.params.items()}
    rng = np.random.default_rng([config.seed, 0x74726E])
    history = TrainHistory()
    best_params = {k: v.copy() for k, v in model.params.items()}

    n = len(x_train)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = model.loss_and_grads(x_train[idx], y_train[idx])
            epoch_loss += loss * len(idx)
            if config.grad_clip > 0.0:
                norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
                if norm > config.grad_clip:
                    scale = config.grad_clip / norm
                    grads = {k: g * scale for k, g in grads.items()}
            for name, g in grads.items():
                velocity[name] = config.momentum * velocity[name] - config.learning_rate * g
                model.params[name] += velocity[name]
        history.train_loss.append(epoch_loss / n)

        preds = model.predict(x_valid)
        f1 = macro_f1(preds.tolist(), y_valid.tolist(), classes=CLASSES)
        history.valid_f1.append(f1)
        if f1 > history.best_f1:
            history.best_f1 = f1
            history.best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
        logger.debug("epoch %d loss %.4f valid F1 %.3f", epoch, history.train_loss[-1], f1)

    model.params = best_params
    if model_path is not None:
        model.save(model_path)
    return model, history


def load_manifest(path) -> list[tuple[SpatialBreathingProfile, int]]:
    """JSON-lines manifest {profile_path, label}; paths resolve relative to the manifest."""
    base = Path(path).parent
    entries = []
    missing = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            profile_path = Path(record["profile_path"])
            if not profile_path.is_absolute():
                profile_path = base / profile_path
            if not profile_path.exists():
                missing.append(str(profile_path))
                continue
            entries.append((read_profile_csv(profile_path), int(record["label"])))
    if missing:
        raise FileNotFoundError("missing profile files: " + ", ".join(missing))
    return entries
