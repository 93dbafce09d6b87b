"""Person-count estimation from a spatial breathing profile.

Two estimators:
  * clustering: Ward-linkage agglomerative clustering over profile rows
    with the cluster count chosen by maximum mean silhouette (a fixed
    dendrogram cut distance does not transfer between scenes).
  * classifier: a small self-attention network over the rasterized
    profile, trained on simulator output, voting over ten row-shuffle
    augmentations.

Both short-circuit: an empty profile is count 0 (no static breathers,
outside the classifier's class set) and a single row is count 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import cdist

from .profiles import SpatialBreathingProfile, augment_profile, rasterize_profile

N_VOTES = 10
SILHOUETTE_FLOOR = 0.25


class ModelRequiredError(FileNotFoundError):
    """Classifier estimator invoked without a trained model."""


@dataclass
class CountEstimate:
    count: int
    method: str                              # "clustering" or "attention-classifier"
    votes: dict[int, int] = field(default_factory=dict)
    confidence: float = 1.0


def mean_silhouette(x: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient; singleton-cluster points score 0."""
    dist = cdist(x, x)
    scores = np.zeros(len(x))
    unique = np.unique(labels)
    for i in range(len(x)):
        own = labels == labels[i]
        if own.sum() <= 1 or len(unique) < 2:
            continue
        a = dist[i, own].sum() / (own.sum() - 1)
        b = min(dist[i, labels == lab].mean() for lab in unique if lab != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def _cluster_count(matrix: np.ndarray, k_max: int, floor: float) -> int:
    n = matrix.shape[0]
    if n == 0:
        return 0
    if n == 1:
        return 1
    links = linkage(matrix, method="ward")
    best_k, best_score = 1, -np.inf
    for k in range(2, min(k_max, n) + 1):
        labels = fcluster(links, t=k, criterion="maxclust")
        score = mean_silhouette(matrix, labels)
        if score > best_score:
            best_k, best_score = k, score
    if best_score < floor:
        return 1
    return best_k


def _majority(votes: dict[int, int]) -> int:
    """Most-voted count; ties break toward the smaller count."""
    top = max(votes.values())
    return min(c for c, v in votes.items() if v == top)


def _vote_seed(seed: int, j: int) -> int:
    return int(np.random.SeedSequence([seed, j]).generate_state(1)[0])


def count_by_clustering(
    profile: SpatialBreathingProfile,
    k_max: int = 8,
    seed: int = 0,
    silhouette_floor: float = SILHOUETTE_FLOOR,
) -> CountEstimate:
    """Cluster-count estimate, voted over row-shuffle augmentations.

    Clustering is row-order independent, so the ten votes agree by
    construction; the voting mirrors the classifier path.
    """
    if profile.n_components == 0:
        return CountEstimate(count=0, method="clustering", votes={0: N_VOTES})
    if profile.n_components == 1:
        return CountEstimate(count=1, method="clustering", votes={1: N_VOTES})
    votes: dict[int, int] = {}
    for j in range(N_VOTES):
        shuffled = augment_profile(profile, seed=_vote_seed(seed, j))
        k = _cluster_count(shuffled.matrix, k_max, silhouette_floor)
        votes[k] = votes.get(k, 0) + 1
    count = _majority(votes)
    return CountEstimate(
        count=count,
        method="clustering",
        votes=votes,
        confidence=votes[count] / N_VOTES,
    )


def count_by_classifier(
    profile: SpatialBreathingProfile,
    model,
    seed: int = 0,
) -> CountEstimate:
    """Majority vote of the attention classifier over ten augmentations."""
    if profile.n_components == 0:
        return CountEstimate(count=0, method="attention-classifier", votes={0: N_VOTES})
    votes: dict[int, int] = {}
    for j in range(N_VOTES):
        shuffled = augment_profile(profile, seed=_vote_seed(seed, j))
        raster = rasterize_profile(shuffled)
        pred = int(model.predict(raster[None])[0])
        votes[pred] = votes.get(pred, 0) + 1
    count = _majority(votes)
    return CountEstimate(
        count=count,
        method="attention-classifier",
        votes=votes,
        confidence=votes[count] / N_VOTES,
    )
