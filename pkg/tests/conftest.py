import numpy as np
import pytest

from mixture_ot.gaussian import Gaussian
from mixture_ot.gmm import Gmm
from mixture_ot.linalg import SpdMatrix


def random_spd(rng, dim, scale=1.0, jitter=1e-3):
    a = rng.standard_normal((dim, dim)) * scale
    return SpdMatrix(a @ a.T + jitter * np.eye(dim))


def random_gaussian(rng, dim, scale=1.0, jitter=1e-3):
    return Gaussian(rng.standard_normal(dim), random_spd(rng, dim, scale, jitter))


def random_gmm(rng, dim, k, scale=1.0, jitter=1e-3, min_weight=0.05):
    weights = rng.random(k) + min_weight
    weights /= weights.sum()
    comps = [random_gaussian(rng, dim, scale, jitter) for _ in range(k)]
    return Gmm(weights, comps)


def gmm_1d(weights, means, sigmas):
    comps = [
        Gaussian(np.array([m]), SpdMatrix(np.array([[s**2]])))
        for m, s in zip(means, sigmas)
    ]
    return Gmm(np.asarray(weights, dtype=float), comps)


@pytest.fixture
def example_1d_pair():
    """The two-component 1D mixture pair used throughout the unit tests."""
    mu0 = gmm_1d([0.3, 0.7], [0.2, 0.4], [0.03, 0.04])
    mu1 = gmm_1d([0.6, 0.4], [0.6, 0.8], [0.06, 0.07])
    return mu0, mu1
