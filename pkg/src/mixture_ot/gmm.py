"""Gaussian mixture models: the core type, density, sampling and fitting.

Fitting is plain expectation-maximization seeded by k-means++, with a
covariance ridge scaled to the data variance so downstream transport
maps stay well posed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import DensityUndefinedError, NumericalError
from .gaussian import Gaussian
from .linalg import SpdMatrix, sym_eig

WEIGHT_TOL = 1e-9
MERGE_TOL = 1e-12
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Gmm:
    """Finite Gaussian mixture: simplex weights plus components of one dimension."""

    weights: np.ndarray
    components: tuple[Gaussian, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        comps = tuple(self.components)
        if len(comps) == 0:
            raise ValueError("a mixture needs at least one component")
        if w.shape[0] != len(comps):
            raise ValueError("one weight per component required")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 within {WEIGHT_TOL:g}")
        dim = comps[0].dim
        for c in comps:
            if c.dim != dim:
                raise ValueError("all components must share one dimension")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def n_components(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class PointCloud:
    """n x d matrix of sample points."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1:
            raise ValueError("points must be an (n, d) array with n >= 1")
        if not np.all(np.isfinite(p)):
            raise ValueError("points must be finite")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def component_log_pdfs(gmm: Gmm, points: np.ndarray) -> np.ndarray:
    """(n, K) matrix of per-component Gaussian log densities."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != gmm.dim:
        raise ValueError(f"points have dimension {x.shape[1]}, mixture has {gmm.dim}")
    out = np.empty((x.shape[0], gmm.n_components))
    for k, comp in enumerate(gmm.components):
        try:
            chol = np.linalg.cholesky(comp.cov.entries)
        except np.linalg.LinAlgError as exc:
            raise DensityUndefinedError(
                f"component {k} has a singular covariance; density undefined"
            ) from exc
        diff = x - comp.mean
        sol = np.linalg.solve(chol, diff.T)
        with np.errstate(over="ignore"):  # far tails saturate to -inf log density
            quad = np.sum(sol**2, axis=0)
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        out[:, k] = -0.5 * (gmm.dim * _LOG_2PI + log_det + quad)
    return out


def log_pdf(gmm: Gmm, x) -> float:
    """Natural-log mixture density at a point, via log-sum-exp."""
    comp_logs = component_log_pdfs(gmm, np.asarray(x, dtype=float).reshape(1, -1))
    with np.errstate(divide="ignore"):
        log_w = np.log(gmm.weights)
    return float(logsumexp(comp_logs[0] + log_w))


def sample(gmm: Gmm, n: int, seed: int) -> PointCloud:
    """Draw n points; deterministic for a fixed seed.

    Degenerate (rank-deficient) covariances are supported through an
    eigenvalue factor, so Dirac components sample exactly their mean.
    """
    if n < 1:
        raise ValueError("need n >= 1 samples")
    rng = np.random.default_rng(seed)
    idx = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    z = rng.standard_normal((n, gmm.dim))
    out = np.empty((n, gmm.dim))
    for k, comp in enumerate(gmm.components):
        mask = idx == k
        if not np.any(mask):
            continue
        vals, vecs = sym_eig(comp.cov)
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
        out[mask] = comp.mean + z[mask] @ factor.T
    return PointCloud(out)


def _component_sort_key(comp: Gaussian):
    return tuple(comp.mean) + tuple(comp.cov.entries.ravel())


def canonicalize(gmm: Gmm) -> Gmm:
    """Canonical form: zero weights dropped, identical components merged,
    components ordered lexicographically by mean then covariance."""
    kept: list[tuple[float, Gaussian]] = []
    for w, comp in zip(gmm.weights, gmm.components):
        if w <= 0.0:
            continue
        for i, (wi, ci) in enumerate(kept):
            if (
                np.max(np.abs(ci.mean - comp.mean)) <= MERGE_TOL
                and np.max(np.abs(ci.cov.entries - comp.cov.entries)) <= MERGE_TOL
            ):
                kept[i] = (wi + w, ci)
                break
        else:
            kept.append((float(w), comp))
    kept.sort(key=lambda pair: _component_sort_key(pair[1]))
    weights = np.array([w for w, _ in kept])
    return Gmm(weights, tuple(c for _, c in kept))


def kmeans(pts: PointCloud, k: int, seed: int, iters: int = 50):
    """Lloyd iterations from k-means++ seeding.

    Returns (labels, centers). Empty clusters are re-seeded to the point
    farthest from its current center, so every cluster ends nonempty.
    """
    x = pts.points
    n = x.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0.0:
            probs = d2 / total
            centers[i] = x[int(rng.choice(n, p=probs))]
        else:
            centers[i] = x[int(rng.integers(n))]
        d2 = np.minimum(d2, np.sum((x - centers[i]) ** 2, axis=1))

    labels = None
    for _ in range(iters):
        dists = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dists, axis=1)
        own = dists[np.arange(n), new_labels]
        for j in range(k):
            if not np.any(new_labels == j):
                far = int(np.argmax(own))
                new_labels[far] = j
                centers[j] = x[far]
                own[far] = -np.inf  # a point can be stolen at most once
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centers[j] = x[labels == j].mean(axis=0)
    return labels, centers


def _em_fit(pts: PointCloud, k: int, seed: int, iters: int, cov_reg: float):
    """EM loop returning (gmm, average log-likelihood trace)."""
    x = pts.points
    n, d = x.shape
    labels, _ = kmeans(pts, k, seed)

    weights = np.empty(k)
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    for j in range(k):
        member = x[labels == j]
        weights[j] = member.shape[0] / n
        means[j] = member.mean(axis=0)
        diff = member - means[j]
        covs[j] = diff.T @ diff / member.shape[0] + cov_reg * np.eye(d)
    weights /= weights.sum()

    trace: list[float] = []
    eye = np.eye(d)
    for _ in range(iters):
        mixture = Gmm(weights, tuple(Gaussian(m, SpdMatrix(c)) for m, c in zip(means, covs)))
        with np.errstate(divide="ignore"):
            joint = component_log_pdfs(mixture, x) + np.log(weights)
        norm = logsumexp(joint, axis=1)
        avg_ll = float(norm.mean())
        if trace:
            if avg_ll < trace[-1] - 1e-9 * (1.0 + abs(trace[-1])):
                raise NumericalError(
                    f"EM log-likelihood decreased: {trace[-1]!r} -> {avg_ll!r}"
                )
            if avg_ll - trace[-1] < 1e-8 * (1.0 + abs(trace[-1])):
                trace.append(avg_ll)
                break
        trace.append(avg_ll)

        resp = np.exp(joint - norm[:, None])
        counts = np.clip(resp.sum(axis=0), 1e-300, None)
        weights = counts / n
        weights /= weights.sum()
        means = (resp.T @ x) / counts[:, None]
        for j in range(k):
            diff = x - means[j]
            covs[j] = (resp[:, j][:, None] * diff).T @ diff / counts[j] + cov_reg * eye

    comps = tuple(Gaussian(m, SpdMatrix(c)) for m, c in zip(means, covs))
    order = sorted(range(k), key=lambda j: _component_sort_key(comps[j]))
    gmm = Gmm(weights[order], tuple(comps[j] for j in order))
    return gmm, trace


def fit_em(pts: PointCloud, k: int, seed: int, iters: int = 100,
           cov_reg: float | None = None) -> Gmm:
    """Fit a k-component mixture by EM from a k-means initialization.

    Parameters
    ----------
    pts : PointCloud
        Training points, n >= k.
    k : int
        Number of components.
    seed : int
        Seeds both the k-means initialization and nothing else; the fit
        is deterministic given (pts, k, seed).
    iters : int
        Iteration cap; the loop stops early once the average
        log-likelihood improves by less than 1e-8 (relative).
    cov_reg : float, optional
        Ridge added to every covariance update. Defaults to 1e-6 times
        the mean per-coordinate variance of the data.
    """
    x = pts.points
    if k < 1 or k > x.shape[0]:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={x.shape[0]}")
    var_scale = float(x.var(axis=0).mean())
    if cov_reg is None:
        cov_reg = 1e-6 * var_scale
    if var_scale == 0.0:
        cov = SpdMatrix(cov_reg * np.eye(x.shape[1]))
        return Gmm(np.array([1.0]), (Gaussian(x[0], cov),))
    gmm, _ = _em_fit(pts, k, seed, iters, cov_reg)
    return gmm


# ---------------------------------------------------------------------------
# serialization


def gmm_to_dict(gmm: Gmm) -> dict:
    return {
        "d": gmm.dim,
        "weights": gmm.weights.tolist(),
        "means": [c.mean.tolist() for c in gmm.components],
        "covs": [c.cov.entries.tolist() for c in gmm.components],
    }


def gmm_from_dict(data: dict) -> Gmm:
    try:
        dim = int(data["d"])
        weights = np.asarray(data["weights"], dtype=float)
        means = [np.asarray(m, dtype=float) for m in data["means"]]
        covs = [np.asarray(c, dtype=float) for c in data["covs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed GMM data: {exc}") from exc
    if not (len(weights) == len(means) == len(covs)):
        raise ValueError("weights, means and covs must have equal length")
    total = weights.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"weights must sum to 1 within 1e-6, got {total!r}")
    if abs(total - 1.0) > WEIGHT_TOL:
        weights = weights / total
    comps = []
    for m, c in zip(means, covs):
        if m.shape != (dim,):
            raise ValueError("mean dimension does not match 'd'")
        comps.append(Gaussian(m, SpdMatrix(c)))
    return Gmm(weights, tuple(comps))


def save_gmm(path, gmm: Gmm) -> None:
    Path(path).write_text(json.dumps(gmm_to_dict(gmm), indent=1) + "\n")


def load_gmm(path) -> Gmm:
    return gmm_from_dict(json.loads(Path(path).read_text()))


def load_point_cloud(path) -> PointCloud:
    """CSV with one point per row, no header."""
    pts = np.loadtxt(path, delimiter=",", ndmin=2)
    return PointCloud(pts)


def save_point_cloud(path, pts: PointCloud) -> None:
    np.savetxt(path, pts.points, delimiter=",", fmt="%.17g")
