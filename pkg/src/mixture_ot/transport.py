"""Exact solvers for small discrete transportation problems.

Both the two-marginal matrix problem and the J-marginal tensor problem
run through one primal simplex specialized to transportation polytopes:
a northwest-corner style staircase provides the initial basis, Bland's
rule (lowest flat cell index) breaks every tie, and basic values are
re-solved from scratch after each pivot so no drift accumulates. The
instances here are tiny (component counts around ten), so exactness and
determinism win over speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

MARGINAL_TOL = 1e-9
MAX_TENSOR_SIZE = 10**6
_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteCoupling:
    """Nonnegative K0 x K1 matrix with prescribed row and column sums."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise ValueError("coupling weights must be a matrix")
        if np.any(w < 0.0):
            raise ValueError("coupling weights must be nonnegative")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def support(self) -> list[tuple[int, int]]:
        """Index pairs with strictly positive weight, in flat order."""
        return [tuple(idx) for idx in np.argwhere(self.weights > 0.0)]


@dataclass(frozen=True)
class MultiCoupling:
    """Nonnegative J-mode tensor with prescribed mode marginals."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0.0):
            raise ValueError("coupling weights must be nonnegative")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    def support(self) -> list[tuple[int, ...]]:
        return [tuple(idx) for idx in np.argwhere(self.weights > 0.0)]


def _validate_marginal(pi, name: str) -> np.ndarray:
    pi = np.asarray(pi, dtype=float).ravel()
    if pi.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(pi)) or np.any(pi < -MARGINAL_TOL):
        raise ValueError(f"{name} must be finite and nonnegative")
    total = pi.sum()
    if abs(total - 1.0) > MARGINAL_TOL:
        raise ValueError(
            f"{name} must lie on the simplex within {MARGINAL_TOL:g} (sum {total!r})"
        )
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _validate_cost(cost, shape: tuple[int, ...]) -> np.ndarray:
    c = np.asarray(cost, dtype=float)
    if c.shape != shape:
        raise ValueError(f"cost shape {c.shape} does not match marginals {shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost entries must be finite")
    if np.any(c < 0.0):
        raise ValueError("cost entries must be nonnegative")
    return c


def _staircase_cells(marginals: list[np.ndarray]) -> list[tuple[int, ...]]:
    """Initial basic cells: the greedy staircase through the index grid.

    Generalizes the northwest-corner rule; always returns exactly
    sum(K_j) - J + 1 cells forming a nonsingular basis.
    """
    n_modes = len(marginals)
    sizes = [m.shape[0] for m in marginals]
    remaining = [m.copy() for m in marginals]
    pos = [0] * n_modes
    cells = [tuple(pos)]
    while True:
        alloc = min(remaining[j][pos[j]] for j in range(n_modes))
        for j in range(n_modes):
            remaining[j][pos[j]] -= alloc
        movable = [j for j in range(n_modes) if pos[j] < sizes[j] - 1]
        if not movable:
            break
        exhausted = [j for j in movable if remaining[j][pos[j]] <= _ZERO_TOL]
        step = exhausted[0] if exhausted else movable[0]
        pos[step] += 1
        cells.append(tuple(pos))
    return cells


class _TransportSimplex:
    """Primal simplex on the flattened transportation LP.

    One equality row per marginal entry; the last row of every marginal
    except the first is dropped to obtain a full-rank system.
    """

    def __init__(self, cost: np.ndarray, marginals: list[np.ndarray]) -> None:
        self.cost = cost
        self.flat_cost = cost.ravel()
        self.marginals = marginals
        self.shape = tuple(m.shape[0] for m in marginals)
        self.n_modes = len(marginals)

        # kept row layout: (j, k) -> position in the reduced system
        self.row_of: list[dict[int, int]] = []
        rhs = []
        pos = 0
        for j, pi in enumerate(marginals):
            keep = pi.shape[0] if j == 0 else pi.shape[0] - 1
            self.row_of.append({k: pos + k for k in range(keep)})
            rhs.extend(pi[:keep])
            pos += keep
        self.rank = pos
        self.rhs = np.asarray(rhs)

    def _column(self, cell: tuple[int, ...]) -> np.ndarray:
        col = np.zeros(self.rank)
        for j, k in enumerate(cell):
            row = self.row_of[j].get(k)
            if row is not None:
                col[row] = 1.0
        return col

    def _basis_matrix(self, cells: list[tuple[int, ...]]) -> np.ndarray:
        return np.column_stack([self._column(c) for c in cells])

    def _reduced_costs(self, duals: np.ndarray) -> np.ndarray:
        red = self.cost.copy()
        for j in range(self.n_modes):
            mode_dual = np.zeros(self.shape[j])
            for k, row in self.row_of[j].items():
                mode_dual[k] = duals[row]
            view = [1] * self.n_modes
            view[j] = self.shape[j]
            red -= mode_dual.reshape(view)
        return red.ravel()

    def solve(self) -> tuple[np.ndarray, float]:
        try:
            return self._solve()
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"transportation simplex basis solve failed: {exc}") from exc

    def _solve(self) -> tuple[np.ndarray, float]:
        cells = _staircase_cells(self.marginals)
        basis = self._basis_matrix(cells)
        values = np.linalg.solve(basis, self.rhs)

        cost_scale = 1.0 + float(np.max(self.flat_cost, initial=0.0))
        enter_tol = 1e-11 * cost_scale
        max_pivots = 1000 * (self.rank + 1)

        for _ in range(max_pivots):
            basis_cost = np.array([self.flat_cost[np.ravel_multi_index(c, self.shape)]
                                   for c in cells])
            duals = np.linalg.solve(basis.T, basis_cost)
            reduced = self._reduced_costs(duals)
            candidates = np.flatnonzero(reduced < -enter_tol)
            if candidates.size == 0:
                break
            entering_flat = int(candidates[0])  # Bland: lowest flat index
            entering = tuple(int(i) for i in np.unravel_index(entering_flat, self.shape))

            direction = np.linalg.solve(basis, self._column(entering))
            positive = direction > 1e-11
            if not np.any(positive):
                raise NumericalError("transportation LP appears unbounded")
            ratios = np.where(positive, np.clip(values, 0.0, None), np.inf)
            ratios = np.where(positive, ratios / np.where(positive, direction, 1.0), np.inf)
            theta = float(ratios.min())
            eligible = np.flatnonzero(ratios <= theta + 1e-12 * (1.0 + theta))
            # Bland: among tying rows, leave the basic cell with lowest flat index
            leave = min(
                eligible,
                key=lambda i: np.ravel_multi_index(cells[i], self.shape),
            )
            cells[leave] = entering
            basis[:, leave] = self._column(entering)
            values = np.linalg.solve(basis, self.rhs)
        else:
            raise NumericalError("transportation simplex exceeded its pivot budget")

        weights = np.zeros(self.shape)
        for cell, val in zip(cells, values):
            if val < -1e-8:
                raise NumericalError(f"basic solution went infeasible ({val:.3e})")
            weights[cell] = max(float(val), 0.0)
        value = float(np.sum(weights.ravel() * self.flat_cost))
        return weights, value


def solve_transport(cost, pi0, pi1) -> tuple[DiscreteCoupling, float]:
    """Exact optimum of the two-marginal transportation problem.

    Returns an optimal basic coupling (at most K0 + K1 - 1 positive
    entries) and the optimal value. Deterministic: identical inputs give
    the identical coupling.
    """
    p0 = _validate_marginal(pi0, "pi0")
    p1 = _validate_marginal(pi1, "pi1")
    c = _validate_cost(cost, (p0.shape[0], p1.shape[0]))
    weights, value = _TransportSimplex(c, [p0, p1]).solve()
    return DiscreteCoupling(weights), value


def solve_multimarginal(cost, marginals) -> tuple[MultiCoupling, float]:
    """Exact optimum of the J-marginal transportation problem on a dense tensor.

    The support of the returned coupling has at most sum(K_j) - J + 1
    entries. Guards against tensors larger than 10^6 entries.
    """
    if len(marginals) == 0:
        raise ValueError("need at least one marginal")
    pis = [_validate_marginal(pi, f"marginal {j}") for j, pi in enumerate(marginals)]
    shape = tuple(p.shape[0] for p in pis)
    if int(np.prod(shape)) > MAX_TENSOR_SIZE:
        raise ValueError(
            f"cost tensor with {int(np.prod(shape))} entries exceeds the dense "
            f"solver guard of {MAX_TENSOR_SIZE}"
        )
    c = _validate_cost(cost, shape)
    weights, value = _TransportSimplex(c, pis).solve()
    return MultiCoupling(weights), value
