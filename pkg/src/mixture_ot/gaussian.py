"""Closed-form quadratic optimal transport between single Gaussians.

Distance, optimal affine map, geodesic interpolation, the barycenter
fixed point and the multi-marginal coupling maps. Everything here is a
pure function of means and covariances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCovarianceError, NumericalError
from .linalg import RANK_TOL, SpdMatrix, pinv, sqrtm, sym_eig

BARYCENTER_TOL = 1e-10
BARYCENTER_MAX_ITER = 500


@dataclass(frozen=True)
class Gaussian:
    """A single Gaussian distribution: mean vector plus PSD covariance."""

    mean: np.ndarray
    cov: SpdMatrix

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean entries must be finite")
        if mean.shape[0] != self.cov.dim:
            raise ValueError(
                f"mean dimension {mean.shape[0]} != covariance dimension {self.cov.dim}"
            )
        mean = mean.copy()
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class AffineMap:
    """x -> linear @ x + offset."""

    linear: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        linear = np.asarray(self.linear, dtype=float)
        offset = np.asarray(self.offset, dtype=float)
        if linear.ndim != 2 or linear.shape[0] != linear.shape[1]:
            raise ValueError("linear part must be a square matrix")
        if offset.ndim != 1 or offset.shape[0] != linear.shape[0]:
            raise ValueError("offset must be a vector matching the linear part")
        linear = linear.copy()
        offset = offset.copy()
        linear.setflags(write=False)
        offset.setflags(write=False)
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "offset", offset)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Apply to one point (d,) or a batch (n, d)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.linear @ x + self.offset
        return x @ self.linear.T + self.offset

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls(np.eye(dim), np.zeros(dim))


def _check_same_dim(g0: Gaussian, g1: Gaussian) -> None:
    if g0.dim != g1.dim:
        raise ValueError(f"dimension mismatch: {g0.dim} vs {g1.dim}")


def _cross_root_eigvals(c0: SpdMatrix, c1: SpdMatrix) -> np.ndarray:
    """Eigenvalues of (c0^{1/2} c1 c0^{1/2})^{1/2}, clamped at zero."""
    r0 = sqrtm(c0).entries
    inner = SpdMatrix(r0 @ c1.entries @ r0)
    vals, _ = sym_eig(inner)
    return np.sqrt(np.clip(vals, 0.0, None))


def w2_gaussian_sq(g0: Gaussian, g1: Gaussian) -> float:
    """Squared quadratic Wasserstein distance between two Gaussians.

    ||m0 - m1||^2 + tr(S0 + S1 - 2 (S0^{1/2} S1 S0^{1/2})^{1/2}),
    clamped at zero against roundoff.
    """
    _check_same_dim(g0, g1)
    if np.array_equal(g0.mean, g1.mean) and np.array_equal(
        g0.cov.entries, g1.cov.entries
    ):
        return 0.0  # exact zero for identical parametrizations, not roundoff
    mean_term = float(np.sum((g0.mean - g1.mean) ** 2))
    cross = float(np.sum(_cross_root_eigvals(g0.cov, g1.cov)))
    value = mean_term + g0.cov.trace + g1.cov.trace - 2.0 * cross
    return max(value, 0.0)


def ot_map_gaussian(g0: Gaussian, g1: Gaussian) -> AffineMap:
    """Optimal affine transport map pushing g0 onto g1.

    Requires a nonsingular source covariance; the linear part is
    S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2}.
    """
    _check_same_dim(g0, g1)
    if g0.cov.is_singular():
        raise DegenerateCovarianceError(
            "source covariance is singular; no affine transport map exists"
        )
    root0 = sqrtm(g0.cov)
    inner = SpdMatrix(root0.entries @ g1.cov.entries @ root0.entries)
    inv_root0 = pinv(root0).entries
    linear = inv_root0 @ sqrtm(inner).entries @ inv_root0
    linear = 0.5 * (linear + linear.T)
    offset = g1.mean - linear @ g0.mean
    return AffineMap(linear, offset)


def interpolate_gaussian(g0: Gaussian, g1: Gaussian, t: float) -> Gaussian:
    """Point at parameter t on the displacement geodesic from g0 to g1.

    Covariance ((1-t) I + t C) S0 ((1-t) I + t C) with
    C = S1^{1/2} (S1^{1/2} S0 S1^{1/2})^{-1/2} S1^{1/2}; the inverse is a
    pseudo-inverse so degenerate covariances take the projected path.
    """
    _check_same_dim(g0, g1)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter must lie in [0, 1], got {t}")
    mean = (1.0 - t) * g0.mean + t * g1.mean
    root1 = sqrtm(g1.cov)
    inner = SpdMatrix(root1.entries @ g0.cov.entries @ root1.entries)
    c = root1.entries @ pinv(sqrtm(inner)).entries @ root1.entries
    a = (1.0 - t) * np.eye(g0.dim) + t * c
    cov = SpdMatrix(a @ g0.cov.entries @ a.T)
    return Gaussian(mean, cov)


def _validate_weights(weights, count: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != count:
        raise ValueError(f"expected {count} weights, got {w.shape[0]}")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1 within 1e-9, got {total!r}")
    return w / total


def barycenter_residual(cov: SpdMatrix, covs: list[SpdMatrix], weights) -> float:
    """Relative Frobenius residual of the barycenter fixed-point equation at cov."""
    w = np.asarray(weights, dtype=float)
    root = sqrtm(cov).entries
    acc = np.zeros_like(root)
    for lam, c in zip(w, covs):
        acc += lam * sqrtm(SpdMatrix(root @ c.entries @ root)).entries
    denom = float(np.linalg.norm(cov.entries))
    gap = float(np.linalg.norm(acc - cov.entries))
    return gap / denom if denom > 0.0 else gap


def gaussian_barycenter(gs: list[Gaussian], weights) -> Gaussian:
    """Weighted barycenter of Gaussians for the quadratic transport cost.

    The mean is the weighted mean; the covariance solves the fixed-point
    equation sum_j w_j (S^{1/2} S_j S^{1/2})^{1/2} = S, iterated from the
    arithmetic mean of the covariances.
    """
    if len(gs) == 0:
        raise ValueError("need at least one Gaussian")
    dim = gs[0].dim
    for g in gs[1:]:
        if g.dim != dim:
            raise ValueError("all Gaussians must share one dimension")
    w = _validate_weights(weights, len(gs))
    mean = sum(lam * g.mean for lam, g in zip(w, gs))
    if len(gs) == 1:
        return Gaussian(mean, gs[0].cov)

    covs = np.stack([g.cov.entries for g in gs])
    s = np.einsum("j,jab->ab", w, covs)
    residual = np.inf
    for _ in range(BARYCENTER_MAX_ITER):
        s_spd = SpdMatrix(s)
        root = sqrtm(s_spd)
        t = np.zeros_like(s)
        for lam, c in zip(w, covs):
            t += lam * sqrtm(SpdMatrix(root.entries @ c @ root.entries)).entries
        denom = float(np.linalg.norm(s))
        gap = float(np.linalg.norm(t - s))
        residual = gap / denom if denom > 0.0 else gap
        if residual < BARYCENTER_TOL:
            return Gaussian(mean, s_spd)
        inv_root = pinv(root).entries
        s = inv_root @ t @ t @ inv_root
        s = 0.5 * (s + s.T)
    raise NumericalError(
        f"barycenter fixed point did not converge within {BARYCENTER_MAX_ITER} "
        f"iterations (residual {residual:.3e})"
    )


def mmw2_gaussian_sq(gs: list[Gaussian], weights) -> float:
    """Multi-marginal transport cost between Gaussians.

    Equals the weighted sum of squared distances to their barycenter.
    """
    w = _validate_weights(weights, len(gs))
    bary = gaussian_barycenter(gs, w)
    return float(sum(lam * w2_gaussian_sq(g, bary) for lam, g in zip(w, gs)))


def multimarginal_plan_gaussian(gs: list[Gaussian], weights) -> list[AffineMap]:
    """Affine maps realizing the optimal multi-marginal Gaussian coupling.

    Map j sends a sample of gs[0] to its coupled point in marginal j; the
    linear part is S_j S_0^{-1} with
    S_j = C_j^{1/2} (C_j^{1/2} C_* C_j^{1/2})^{-1/2} C_j^{1/2},
    and offsets are chosen so that map_j(m_0) = m_j.
    """
    w = _validate_weights(weights, len(gs))
    for g in gs:
        if g.cov.is_singular():
            raise DegenerateCovarianceError(
                "multi-marginal plan needs positive definite covariances"
            )
    bary = gaussian_barycenter(gs, w)
    star = bary.cov.entries

    def s_matrix(g: Gaussian) -> np.ndarray:
        root = sqrtm(g.cov).entries
        inner = SpdMatrix(root @ star @ root)
        s = root @ pinv(sqrtm(inner)).entries @ root
        return 0.5 * (s + s.T)

    s0_inv = pinv(SpdMatrix(s_matrix(gs[0]))).entries
    maps = [AffineMap.identity(gs[0].dim)]
    for g in gs[1:]:
        linear = s_matrix(g) @ s0_inv
        offset = g.mean - linear @ gs[0].mean
        maps.append(AffineMap(linear, offset))
    return maps
