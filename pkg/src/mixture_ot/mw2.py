"""The mixture transport distance between two GMMs.

Restricting admissible couplings to mixtures turns the continuous
problem into a small transportation LP over pairwise Gaussian costs;
the optimal plan is a weighted family of affine maps between
components, which also yields explicit geodesics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateCovarianceError
from .gaussian import AffineMap, Gaussian, ot_map_gaussian, w2_gaussian_sq
from .gmm import Gmm, canonicalize
from .linalg import SpdMatrix
from .transport import DiscreteCoupling, solve_transport


@dataclass(frozen=True)
class TransportPlan:
    """Optimal mixture coupling: LP weights plus per-pair affine maps.

    maps[k][l] is the optimal map from source component k to target
    component l, or None when the source component is degenerate.
    """

    coupling: DiscreteCoupling
    maps: tuple[tuple[AffineMap | None, ...], ...]
    source: Gmm
    target: Gmm

    def map_for(self, k: int, l: int) -> AffineMap:
        amap = self.maps[k][l]
        if amap is None:
            raise DegenerateCovarianceError(
                f"no transport map for pair ({k}, {l}): source component is degenerate"
            )
        return amap

    def support(self) -> list[tuple[int, int]]:
        return self.coupling.support()


def mw2(gmm0: Gmm, gmm1: Gmm) -> tuple[float, TransportPlan]:
    """Mixture transport distance and its optimal plan.

    Inputs are canonicalized internally; the squared distance is the
    optimum of the transportation LP whose costs are the pairwise
    squared Gaussian distances. Maps are built eagerly for every pair
    with a nonsingular source component and marked absent otherwise
    (the distance needs no inverse, so it is always returned).
    """
    if gmm0.dim != gmm1.dim:
        raise ValueError(f"dimension mismatch: {gmm0.dim} vs {gmm1.dim}")
    g0 = canonicalize(gmm0)
    g1 = canonicalize(gmm1)
    k0, k1 = g0.n_components, g1.n_components
    cost = np.empty((k0, k1))
    for k, ck in enumerate(g0.components):
        for l, cl in enumerate(g1.components):
            cost[k, l] = w2_gaussian_sq(ck, cl)
    coupling, value = solve_transport(cost, g0.weights, g1.weights)

    rows = []
    for ck in g0.components:
        if ck.cov.is_singular():
            rows.append((None,) * k1)
        else:
            rows.append(tuple(ot_map_gaussian(ck, cl) for cl in g1.components))
    plan = TransportPlan(coupling, tuple(rows), g0, g1)
    return float(np.sqrt(max(value, 0.0))), plan


def mw2_geodesic(plan: TransportPlan, t: float) -> Gmm:
    """Displacement interpolation at parameter t under an optimal plan.

    Each positive-weight pair contributes the push-forward of the source
    component under (1-t) Id + t T_{k,l}; the result is canonicalized.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter must lie in [0, 1], got {t}")
    dim = plan.source.dim
    eye = np.eye(dim)
    weights = []
    comps = []
    for k, l in plan.support():
        amap = plan.map_for(k, l)
        comp = plan.source.components[k]
        a_t = (1.0 - t) * eye + t * amap.linear
        mean = (1.0 - t) * comp.mean + t * amap(comp.mean)
        cov = SpdMatrix(a_t @ comp.cov.entries @ a_t.T)
        weights.append(plan.coupling.weights[k, l])
        comps.append(Gaussian(mean, cov))
    return canonicalize(Gmm(np.array(weights), tuple(comps)))


def mw2_trace_bound(gmm0: Gmm, gmm1: Gmm) -> float:
    """Additive trace term bounding the gap between mixture and plain
    quadratic transport: sum over both mixtures of sqrt(2 sum_k pi_k tr cov_k)."""
    total = 0.0
    for g in (gmm0, gmm1):
        traces = np.array([c.cov.trace for c in g.components])
        total += float(np.sqrt(2.0 * np.dot(g.weights, traces)))
    return total


# ---------------------------------------------------------------------------
# exact 1D transport (quantile coupling), used as a comparison oracle


def quantiles_1d(gmm: Gmm, probs: np.ndarray) -> np.ndarray:
    """Quantiles of a 1D mixture by bisection on its CDF.

    Degenerate components contribute a CDF step at their mean.
    """
    if gmm.dim != 1:
        raise ValueError("quantiles_1d requires a one-dimensional mixture")
    probs = np.asarray(probs, dtype=float)
    if np.any(probs <= 0.0) or np.any(probs >= 1.0):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    means = np.array([c.mean[0] for c in gmm.components])
    sigmas = np.sqrt(np.array([c.cov.entries[0, 0] for c in gmm.components]))
    weights = gmm.weights

    def cdf(x):
        # x: (n,) -> mixture CDF at each point
        diff = x[:, None] - means[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(sigmas > 0.0, diff / np.where(sigmas > 0.0, sigmas, 1.0), 0.0)
        comp = np.where(sigmas > 0.0, ndtr(z), (diff >= 0.0).astype(float))
        return comp @ weights

    span = max(float(sigmas.max(initial=0.0)), 1e-300)
    lo = np.full(probs.shape, means.min() - 50.0 * span - 1.0)
    hi = np.full(probs.shape, means.max() + 50.0 * span + 1.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < probs
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < 1e-13 * max(1.0, np.max(np.abs(lo)), np.max(np.abs(hi))):
            break
    return 0.5 * (lo + hi)


def w2_1d_exact(gmm0: Gmm, gmm1: Gmm, quad_points: int = 4096) -> float:
    """Exact quadratic transport between 1D mixtures via quantile coupling.

    Midpoint quadrature of the squared quantile gap over (0, 1).
    """
    if gmm0.dim != 1 or gmm1.dim != 1:
        raise ValueError("w2_1d_exact requires one-dimensional mixtures")
    us = (np.arange(quad_points) + 0.5) / quad_points
    q0 = quantiles_1d(gmm0, us)
    q1 = quantiles_1d(gmm1, us)
    return float(np.sqrt(max(np.mean((q0 - q1) ** 2), 0.0)))


# ---------------------------------------------------------------------------
# plan serialization


def plan_to_dict(plan: TransportPlan) -> dict:
    """JSON payload: coupling weights plus the maps of positive-weight pairs.

    Pairs whose source component is degenerate carry no map and are
    skipped in the map list.
    """
    maps = []
    for k, l in plan.support():
        amap = plan.maps[k][l]
        if amap is None:
            continue
        maps.append(
            {
                "k": int(k),
                "l": int(l),
                "linear": amap.linear.tolist(),
                "offset": amap.offset.tolist(),
            }
        )
    return {"weights": plan.coupling.weights.tolist(), "maps": maps}


def save_plan(path, plan: TransportPlan) -> None:
    Path(path).write_text(json.dumps(plan_to_dict(plan), indent=1) + "\n")
