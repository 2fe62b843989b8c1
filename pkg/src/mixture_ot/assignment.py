"""Pointwise assignments extracted from a mixture transport plan.

A plan is not the graph of a single map, but conditioning on a point x
gives a discrete distribution over the per-pair affine maps. From it we
expose the conditional-expectation map (smooth, may drift off the
target) and the stochastic map (samples a pair per point, matches the
target in expectation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import PosteriorUndefinedError
from .gmm import component_log_pdfs
from .mw2 import TransportPlan


@dataclass(frozen=True)
class PairPosterior:
    """Probabilities over component pairs given one source point;
    entries are nonnegative and sum to one over the whole table."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2:
            raise ValueError("pair posterior must be a matrix")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


def _support_posteriors(plan: TransportPlan, points: np.ndarray) -> tuple[list, np.ndarray]:
    """Posterior over positive-weight pairs for a batch of points.

    Returns (support pairs, (n, S) probabilities). Raises when some
    point has zero source density.
    """
    support = plan.support()
    log_comp = component_log_pdfs(plan.source, points)
    log_w = np.array([np.log(plan.coupling.weights[k, l]) for k, l in support])
    joint = log_comp[:, [k for k, _ in support]] + log_w
    norm = logsumexp(joint, axis=1)
    bad = ~np.isfinite(norm)
    if np.any(bad):
        raise PosteriorUndefinedError(
            f"source density vanishes at point index {int(np.flatnonzero(bad)[0])}"
        )
    return support, np.exp(joint - norm[:, None])


def posterior(plan: TransportPlan, x) -> PairPosterior:
    """Posterior pair probabilities at one point, as a full K0 x K1 table."""
    pts = np.asarray(x, dtype=float).reshape(1, -1)
    support, probs = _support_posteriors(plan, pts)
    table = np.zeros(plan.coupling.shape)
    for (k, l), p in zip(support, probs[0]):
        table[k, l] = p
    return PairPosterior(table)


def transport_points(plan: TransportPlan, points, kind: str = "mean",
                     seed: int = 0) -> np.ndarray:
    """Apply the plan's assignment map to a batch of points.

    kind="mean" averages the pair maps under the posterior; kind="rand"
    samples one pair per point. Random draws are reproducible per point:
    point i consumes the i-th uniform of the generator seeded with
    `seed`, independent of the batch size.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    support, probs = _support_posteriors(plan, pts)
    maps = [plan.map_for(k, l) for k, l in support]

    if kind == "mean":
        out = np.zeros_like(pts)
        for amap, p in zip(maps, probs.T):
            out += p[:, None] * amap(pts)
        return out
    if kind == "rand":
        rng = np.random.default_rng(seed)
        u = rng.random(pts.shape[0])
        cum = np.cumsum(probs, axis=1)
        cum[:, -1] = 1.0
        choice = np.sum(u[:, None] >= cum, axis=1)
        out = np.empty_like(pts)
        for s, amap in enumerate(maps):
            mask = choice == s
            if np.any(mask):
                out[mask] = amap(pts[mask])
        return out
    raise ValueError(f"unknown map kind {kind!r}; expected 'mean' or 'rand'")


def t_mean(plan: TransportPlan, x) -> np.ndarray:
    """Conditional-expectation assignment at one point."""
    pts = np.asarray(x, dtype=float).reshape(1, -1)
    return transport_points(plan, pts, kind="mean")[0]


def t_rand(plan: TransportPlan, x, seed: int) -> np.ndarray:
    """Stochastic assignment at one point; deterministic given (x, seed)."""
    pts = np.asarray(x, dtype=float).reshape(1, -1)
    return transport_points(plan, pts, kind="rand", seed=seed)[0]
