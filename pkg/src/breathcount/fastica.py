"""FastICA with symmetric decorrelation and a log-cosh contrast.

Input rows are mixtures (radar points), columns are observations (frames).
Whitening uses the eigendecomposition of the sample covariance; the
estimated mixing matrix is the pseudo-inverse of the total unmixing
transform, so each source carries a signed per-mixture contribution
column. Sources come back with exactly zero mean and unit sample variance;
sign, scale, and order are ambiguous as usual for ICA.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 500
DEFAULT_RANK_FLOOR = 1e-10


class RankDeficientError(ValueError):
    """Requested more components than the data covariance supports."""


@dataclass
class FastIcaResult:
    sources: np.ndarray     # (n_components, n_samples)
    mixing: np.ndarray      # (n_mixtures, n_components)
    unmixing: np.ndarray    # (n_components, n_mixtures)
    converged: bool
    n_iterations: int


def _symmetric_decorrelation(w: np.ndarray) -> np.ndarray:
    s, u = np.linalg.eigh(w @ w.T)
    s = np.maximum(s, np.finfo(float).tiny)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def fast_ica(
    x: np.ndarray,
    n_components: int,
    rng: np.random.Generator,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    rank_floor: float = DEFAULT_RANK_FLOOR,
) -> FastIcaResult:
    """Separate x (n_mixtures, n_samples) into n_components sources.

    rank_floor: relative eigenvalue below which a whitening direction is
    treated as rank deficiency. Quantized displacement rows carry broad
    low-variance quantization artifacts, so callers separating them raise
    this well above the numerical default.
    """
    x = np.asarray(x, dtype=np.float64)
    n_mixtures, n_samples = x.shape
    if n_components < 1 or n_components > n_mixtures:
        raise RankDeficientError(
            f"cannot extract {n_components} components from {n_mixtures} mixtures"
        )

    mean = x.mean(axis=1, keepdims=True)
    xc = x - mean
    cov = xc @ xc.T / n_samples
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    if evals[0] <= 0.0 or evals[n_components - 1] <= rank_floor * evals[0]:
        raise RankDeficientError(
            f"covariance rank below {n_components} (eigenvalue "
            f"{evals[n_components - 1]:.3e} vs leading {evals[0]:.3e})"
        )
    d = evals[:n_components]
    whiten = (evecs[:, :n_components] / np.sqrt(d)).T   # (k, n_mixtures)
    z = whiten @ xc                                     # white: z z^T / n = I

    w = _symmetric_decorrelation(rng.standard_normal((n_components, n_components)))
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        wz = w @ z
        g = np.tanh(wz)
        g_prime = 1.0 - g**2
        w_new = (g @ z.T) / n_samples - np.diag(g_prime.mean(axis=1)) @ w
        w_new = _symmetric_decorrelation(w_new)
        delta = float(np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0)))
        w = w_new
        if delta < tol:
            converged = True
            break

    sources = w @ z
    unmixing = w @ whiten
    mixing = np.linalg.pinv(unmixing)
    return FastIcaResult(
        sources=sources,
        mixing=mixing,
        unmixing=unmixing,
        converged=converged,
        n_iterations=iterations,
    )
