import logging

import numpy as np
import pytest

from breathcount import LOWRES_PRESET, Person, Scene

logging.getLogger("breathcount").setLevel(logging.ERROR)


@pytest.fixture
def lowres():
    return LOWRES_PRESET


@pytest.fixture
def one_breather_scene():
    person = Person(x=3.0, y=0.0, breathing_hz=0.25, breathing_amplitude=0.005)
    return Scene(persons=(person,), noise_floor_db=None, seed=7)


def align_by_correlation(recovered: np.ndarray, truth: np.ndarray):
    """Best |correlation| assignment of recovered rows to truth rows.

    Resolves ICA's permutation/sign ambiguity; returns the list of
    |correlation| values per truth row under the optimal matching.
    """
    from scipy.optimize import linear_sum_assignment

    r = recovered - recovered.mean(axis=1, keepdims=True)
    t = truth - truth.mean(axis=1, keepdims=True)
    r /= np.linalg.norm(r, axis=1, keepdims=True)
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    corr = np.abs(t @ r.T)   # (n_truth, n_recovered)
    rows, cols = linear_sum_assignment(-corr)
    return corr[rows, cols]
