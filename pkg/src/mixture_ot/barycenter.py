"""Multi-marginal mixture transport and mixture barycenters.

The J-marginal problem reduces to a transportation LP on the tensor of
multi-marginal Gaussian costs between component tuples; the barycenter
is assembled from Gaussian barycenters of the tuples in the optimal
coupling's support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import Gaussian, gaussian_barycenter, mmw2_gaussian_sq
from .gmm import Gmm, _component_sort_key, canonicalize
from .transport import MAX_TENSOR_SIZE, MultiCoupling, solve_multimarginal


@dataclass(frozen=True)
class BarycenterResult:
    """Barycenter mixture, the optimal multi-marginal coupling that
    produced it, and the squared multi-marginal cost."""

    barycenter: Gmm
    coupling: MultiCoupling
    cost: float


def _validate_inputs(gmms, weights):
    if len(gmms) < 2:
        raise ValueError("need at least two mixtures")
    dim = gmms[0].dim
    for g in gmms[1:]:
        if g.dim != dim:
            raise ValueError("all mixtures must share one dimension")
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != len(gmms):
        raise ValueError(f"expected {len(gmms)} weights, got {w.shape[0]}")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1 within 1e-9")
    return w / w.sum()


def _cost_tensor(gmms: list[Gmm], weights: np.ndarray) -> np.ndarray:
    """Tensor of multi-marginal Gaussian costs over component tuples.

    The covariance part of the cost depends only on the covariance
    tuple, so it is memoized by covariance fingerprints; the mean part
    uses the pairwise identity sum_{i<j} w_i w_j ||m_i - m_j||^2.
    """
    shape = tuple(g.n_components for g in gmms)
    n_modes = len(gmms)

    cost = np.zeros(shape)
    for i in range(n_modes):
        for j in range(i + 1, n_modes):
            mi = np.stack([c.mean for c in gmms[i].components])
            mj = np.stack([c.mean for c in gmms[j].components])
            d2 = np.sum((mi[:, None, :] - mj[None, :, :]) ** 2, axis=2)
            view = [1] * n_modes
            view[i], view[j] = shape[i], shape[j]
            cost += weights[i] * weights[j] * d2.reshape(view)

    cov_keys = [[c.cov.entries.tobytes() for c in g.components] for g in gmms]
    zero_means = [
        [Gaussian(np.zeros(g.dim), c.cov) for c in g.components] for g in gmms
    ]
    memo: dict[tuple, float] = {}
    cov_cost = np.empty(shape)
    for idx in np.ndindex(shape):
        key = tuple(cov_keys[j][k] for j, k in enumerate(idx))
        val = memo.get(key)
        if val is None:
            tup = [zero_means[j][k] for j, k in enumerate(idx)]
            val = mmw2_gaussian_sq(tup, weights)
            memo[key] = val
        cov_cost[idx] = val
    return cost + cov_cost


def _mmw2_canonical(gmms: list[Gmm], weights: np.ndarray):
    shape = tuple(g.n_components for g in gmms)
    if int(np.prod(shape)) > MAX_TENSOR_SIZE:
        raise ValueError(
            f"component tuple count {int(np.prod(shape))} exceeds the dense "
            f"solver guard of {MAX_TENSOR_SIZE}"
        )
    cost = _cost_tensor(gmms, weights)
    return solve_multimarginal(cost, [g.weights for g in gmms])


def mmw2(gmms: list[Gmm], weights) -> tuple[float, MultiCoupling]:
    """Squared multi-marginal mixture transport cost and optimal coupling.

    Inputs are canonicalized internally; coupling indices refer to the
    canonical components.
    """
    w = _validate_inputs(gmms, weights)
    canon = [canonicalize(g) for g in gmms]
    coupling, value = _mmw2_canonical(canon, w)
    return float(value), coupling


def mw2_barycenter(gmms: list[Gmm], weights) -> BarycenterResult:
    """Weighted mixture barycenter via the multi-marginal coupling.

    Every support entry of the optimal coupling contributes the Gaussian
    barycenter of its component tuple, weighted by the coupling mass;
    components are returned in canonical order (no merging, so they stay
    aligned with the coupling support).
    """
    w = _validate_inputs(gmms, weights)
    canon = [canonicalize(g) for g in gmms]
    coupling, value = _mmw2_canonical(canon, w)

    entries = []
    for idx in coupling.support():
        tup = [canon[j].components[k] for j, k in enumerate(idx)]
        comp = gaussian_barycenter(tup, w)
        entries.append((float(coupling.weights[idx]), comp))
    entries.sort(key=lambda pair: _component_sort_key(pair[1]))
    bary_weights = np.array([wt for wt, _ in entries])
    bary = Gmm(bary_weights / bary_weights.sum(), tuple(c for _, c in entries))
    return BarycenterResult(bary, coupling, float(value))
