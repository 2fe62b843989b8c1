"""Relaxed transport-plus-likelihood fitting of a 1D mixture coupling.

Instead of fitting each point cloud separately and transporting between
the fits, one mixture coupling is optimized directly: a transport cost
between its two marginals plus lambda times the negative mean
log-likelihood of each cloud under the matching marginal. The coupling
correlation within each component can be taken at its extreme, so only
weights, means and standard deviations remain as parameters. Gradients
are analytic; optimization is projected gradient descent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import NumericalError
from .gaussian import Gaussian
from .gmm import Gmm, PointCloud, fit_em
from .linalg import SpdMatrix

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class CouplingParams1D:
    """Parameters of a K-component coupling between two 1D marginals:
    shared simplex weights, per-marginal means and standard deviations."""

    pi: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    s0: np.ndarray
    s1: np.ndarray

    def __post_init__(self):
        arrays = {}
        k = None
        for name in ("pi", "m0", "m1", "s0", "s1"):
            arr = np.asarray(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            if k is None:
                k = arr.shape[0]
            elif arr.shape[0] != k:
                raise ValueError("all parameter vectors must share one length")
            arr = arr.copy()
            arr.setflags(write=False)
            arrays[name] = arr
        if k == 0:
            raise ValueError("need at least one component")
        if np.any(arrays["pi"] < 0.0) or abs(arrays["pi"].sum() - 1.0) > 1e-9:
            raise ValueError("pi must lie on the simplex within 1e-9")
        if np.any(arrays["s0"] <= 0.0) or np.any(arrays["s1"] <= 0.0):
            raise ValueError("standard deviations must be positive")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return self.pi.shape[0]

    def marginal(self, side: int) -> Gmm:
        """The 1D mixture marginal on side 0 or 1."""
        means = self.m0 if side == 0 else self.m1
        sigmas = self.s0 if side == 0 else self.s1
        comps = tuple(
            Gaussian(np.array([m]), SpdMatrix([[s * s]]))
            for m, s in zip(means, sigmas)
        )
        return Gmm(self.pi, comps)

    def transport_term(self) -> float:
        """sum_k pi_k [(m0_k - m1_k)^2 + (s0_k - s1_k)^2]."""
        return float(
            np.dot(self.pi, (self.m0 - self.m1) ** 2 + (self.s0 - self.s1) ** 2)
        )


@dataclass(frozen=True)
class EnergyGradient:
    """Partial derivatives of the energy, shaped like CouplingParams1D."""

    pi: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    s0: np.ndarray
    s1: np.ndarray


def _as_1d(cloud: PointCloud, name: str) -> np.ndarray:
    if cloud.dim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return cloud.points[:, 0]


def _log_gauss(x: np.ndarray, means: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    z = (x[:, None] - means[None, :]) / sigmas[None, :]
    return -0.5 * z**2 - np.log(sigmas)[None, :] - 0.5 * _LOG_2PI


def _mean_loglik(x, pi, means, sigmas) -> float:
    with np.errstate(divide="ignore"):
        joint = _log_gauss(x, means, sigmas) + np.log(pi)[None, :]
    return float(logsumexp(joint, axis=1).mean())


def energy(params: CouplingParams1D, nu0: PointCloud, nu1: PointCloud,
           lam: float) -> float:
    """Transport term minus lambda times the mean log-density of each cloud
    under its marginal."""
    if lam <= 0.0:
        raise ValueError("lambda must be positive")
    x0 = _as_1d(nu0, "nu0")
    x1 = _as_1d(nu1, "nu1")
    ll0 = _mean_loglik(x0, params.pi, params.m0, params.s0)
    ll1 = _mean_loglik(x1, params.pi, params.m1, params.s1)
    return params.transport_term() - lam * (ll0 + ll1)


def _side_stats(x, pi, means, sigmas):
    """Responsibilities averaged over the cloud and the matching moment
    estimates (second moment centered at the current means)."""
    with np.errstate(divide="ignore"):
        joint = _log_gauss(x, means, sigmas) + np.log(pi)[None, :]
    norm = logsumexp(joint, axis=1)
    resp = np.exp(joint - norm[:, None])
    pi_t = resp.mean(axis=0)
    safe = np.clip(pi_t, 1e-300, None)
    m_t = (resp * x[:, None]).mean(axis=0) / safe
    var_t = (resp * (x[:, None] - means[None, :]) ** 2).mean(axis=0) / safe
    return pi_t, m_t, var_t


def gradient(params: CouplingParams1D, nu0: PointCloud, nu1: PointCloud,
             lam: float) -> EnergyGradient:
    """Analytic partial derivatives of the energy.

    For each side i: dF/dm_i = 2 pi (m_i - m_j) - lam pi_t / s_i^2 (m_t - m_i)
    and dF/ds_i = 2 pi (s_i - s_j) - lam pi_t / s_i^3 (var_t - s_i^2), with
    pi_t, m_t, var_t the responsibility-weighted empirical estimates;
    dF/dpi picks up the transport cost of the pair minus
    lam (pi_t0 + pi_t1) / pi.
    """
    if lam <= 0.0:
        raise ValueError("lambda must be positive")
    x0 = _as_1d(nu0, "nu0")
    x1 = _as_1d(nu1, "nu1")
    pi, m0, m1, s0, s1 = params.pi, params.m0, params.m1, params.s0, params.s1

    pi_t0, m_t0, var_t0 = _side_stats(x0, pi, m0, s0)
    pi_t1, m_t1, var_t1 = _side_stats(x1, pi, m1, s1)

    pair_cost = (m0 - m1) ** 2 + (s0 - s1) ** 2
    g_pi = pair_cost - lam * (pi_t0 + pi_t1) / np.clip(pi, 1e-300, None)
    g_m0 = 2.0 * pi * (m0 - m1) - lam * pi_t0 / s0**2 * (m_t0 - m0)
    g_m1 = 2.0 * pi * (m1 - m0) - lam * pi_t1 / s1**2 * (m_t1 - m1)
    g_s0 = 2.0 * pi * (s0 - s1) - lam * pi_t0 / s0**3 * (var_t0 - s0**2)
    g_s1 = 2.0 * pi * (s1 - s0) - lam * pi_t1 / s1**3 * (var_t1 - s1**2)
    return EnergyGradient(g_pi, g_m0, g_m1, g_s0, g_s1)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = (np.cumsum(u) - 1.0) / np.arange(1, v.shape[0] + 1)
    rho = np.flatnonzero(u > css)[-1]
    return np.clip(v - css[rho], 0.0, None)


def optimize(nu0: PointCloud, nu1: PointCloud, k: int, lam: float, seed: int = 0,
             step: float = 1e-3, iters: int = 5000,
             sigma_min: float | None = None, callback=None) -> CouplingParams1D:
    """Projected gradient descent on the relaxed energy.

    Initialization fits each cloud separately with a K-component EM,
    matches components by sorted means, and averages the weight vectors.
    Every iteration takes a gradient step, clamps the standard
    deviations at sigma_min (1e-4 times the data scale by default) and
    projects the weights back onto the simplex; the step is halved until
    the energy does not increase, so the energy trace is non-increasing.

    callback, when given, is called as callback(iteration, energy) after
    every accepted step.
    """
    x0 = _as_1d(nu0, "nu0")
    x1 = _as_1d(nu1, "nu1")
    if sigma_min is None:
        scale = max(float(x0.std()), float(x1.std()))
        sigma_min = 1e-4 * scale if scale > 0.0 else 1e-12

    fits = [fit_em(nu0, k, seed), fit_em(nu1, k, seed)]
    if fits[0].n_components != k or fits[1].n_components != k:
        raise ValueError("EM initialization collapsed; need clouds with k distinct modes")
    # fit_em orders components lexicographically, so 1D fits come sorted by mean
    m_init = [np.array([c.mean[0] for c in f.components]) for f in fits]
    s_init = [
        np.clip(np.sqrt([c.cov.entries[0, 0] for c in f.components]), sigma_min, None)
        for f in fits
    ]
    pi_init = 0.5 * (fits[0].weights + fits[1].weights)
    params = CouplingParams1D(pi_init / pi_init.sum(),
                              m_init[0], m_init[1], s_init[0], s_init[1])

    current = energy(params, nu0, nu1, lam)
    if np.isnan(current):
        raise NumericalError("energy is NaN at iteration 0")
    if callback is not None:
        callback(0, current)

    for it in range(1, iters + 1):
        grad = gradient(params, nu0, nu1, lam)
        while True:
            candidate = CouplingParams1D(
                project_simplex(params.pi - step * grad.pi),
                params.m0 - step * grad.m0,
                params.m1 - step * grad.m1,
                np.clip(params.s0 - step * grad.s0, sigma_min, None),
                np.clip(params.s1 - step * grad.s1, sigma_min, None),
            )
            value = energy(candidate, nu0, nu1, lam)
            if np.isnan(value):
                raise NumericalError(f"energy diverged to NaN at iteration {it}")
            if value <= current:
                params, current = candidate, value
                break
            step *= 0.5
            if step < 1e-20:
                return params  # stalled at a kink; energy can no longer decrease
        if callback is not None:
            callback(it, current)
    return params
