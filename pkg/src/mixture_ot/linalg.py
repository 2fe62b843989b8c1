"""Dense symmetric positive semi-definite linear algebra.

Covariance matrices here are small (a handful of dimensions for point
clouds, 3*p*p for image patches), so every matrix carries its full
eigendecomposition and all spectral operations reuse it.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError

# Relative threshold below which an eigenvalue counts as zero in pinv.
RANK_TOL = 1e-12


def _eigh_descending(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        vals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigendecomposition failed: {exc}") from exc
    return vals[::-1].copy(), vecs[:, ::-1].copy()


class SpdMatrix:
    """Immutable symmetric positive semi-definite matrix.

    The input is symmetrized exactly on construction. Eigenvalues are
    allowed to dip slightly below zero (relative tolerance scaled by the
    spectral radius, to absorb roundoff); anything more negative rejects
    construction.
    """

    __slots__ = ("dim", "entries", "_eigvals", "_eigvecs")

    def __init__(self, entries) -> None:
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] == 0:
            raise ValueError("matrix dimension must be positive")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a = 0.5 * (a + a.T)
        vals, vecs = _eigh_descending(a)
        radius = float(max(abs(vals[0]), abs(vals[-1])))
        eps_sym = 1e-10 * (1.0 + radius)
        if vals[-1] < -eps_sym:
            raise ValueError(
                f"matrix is not positive semi-definite: smallest eigenvalue "
                f"{vals[-1]:.3e} below tolerance -{eps_sym:.3e}"
            )
        a.setflags(write=False)
        vals.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(self, "dim", a.shape[0])
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "_eigvals", vals)
        object.__setattr__(self, "_eigvecs", vecs)

    def __setattr__(self, name, value):
        raise AttributeError("SpdMatrix is immutable")

    @classmethod
    def _from_eig(cls, vals: np.ndarray, vecs: np.ndarray) -> "SpdMatrix":
        """Build from a known nonnegative spectrum; skips the PSD check."""
        obj = object.__new__(cls)
        a = (vecs * vals) @ vecs.T
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        order = np.argsort(vals)[::-1]
        vals = np.array(vals)[order]
        vecs = np.array(vecs)[:, order]
        vals.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(obj, "dim", a.shape[0])
        object.__setattr__(obj, "entries", a)
        object.__setattr__(obj, "_eigvals", vals)
        object.__setattr__(obj, "_eigvecs", vecs)
        return obj

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    def min_eigenvalue(self) -> float:
        return float(self._eigvals[-1])

    def max_eigenvalue(self) -> float:
        return float(self._eigvals[0])

    def is_singular(self, rank_tol: float = RANK_TOL) -> bool:
        """True when the smallest eigenvalue is (relatively) indistinguishable from 0."""
        top = self._eigvals[0]
        return top <= 0.0 or self._eigvals[-1] <= rank_tol * top

    def __repr__(self) -> str:  # pragma: no cover
        return f"SpdMatrix(dim={self.dim})"


def sym_eig(m: SpdMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (sorted descending) and matching orthonormal eigenvector columns."""
    return m._eigvals, m._eigvecs


def sqrtm(m: SpdMatrix) -> SpdMatrix:
    """Unique PSD square root; negative roundoff eigenvalues are clamped to zero."""
    vals, vecs = sym_eig(m)
    return SpdMatrix._from_eig(np.sqrt(np.clip(vals, 0.0, None)), vecs)


def pinv(m: SpdMatrix, rank_tol: float = RANK_TOL) -> SpdMatrix:
    """Moore-Penrose pseudo-inverse; eigenvalues <= rank_tol * max are zeroed."""
    vals, vecs = sym_eig(m)
    cutoff = rank_tol * max(vals[0], 0.0)
    inv_vals = np.where(vals > cutoff, 1.0 / np.where(vals > cutoff, vals, 1.0), 0.0)
    return SpdMatrix._from_eig(inv_vals, vecs)
