"""Brute-force transportation-LP oracle: enumerate every basis of the
constraint matrix, solve for the basic point, keep feasible ones, and
report the best objective value. Independent of the package solver."""

import itertools

import numpy as np

_FEAS_TOL = 1e-10
_CHUNK = 20000


def _constraint_matrix(shape):
    """Reduced full-rank constraint matrix (all rows of marginal 0, all but
    the last row of every other marginal), columns in flat cell order."""
    n_modes = len(shape)
    rows = []
    for j, size in enumerate(shape):
        keep = size if j == 0 else size - 1
        rows.extend((j, k) for k in range(keep))
    a = np.zeros((len(rows), int(np.prod(shape))))
    for flat, cell in enumerate(itertools.product(*(range(s) for s in shape))):
        for r, (j, k) in enumerate(rows):
            if cell[j] == k:
                a[r, flat] = 1.0
    return a


def _rhs(marginals):
    vals = []
    for j, pi in enumerate(marginals):
        keep = len(pi) if j == 0 else len(pi) - 1
        vals.extend(pi[:keep])
    return np.asarray(vals, dtype=float)


def bruteforce_optima(shape, instances):
    """Minimum objective over all basic feasible solutions.

    instances: list of (cost_array, marginals) sharing the given shape.
    Returns one optimal value per instance. Enumeration work is shared
    across instances of the same shape.
    """
    shape = tuple(shape)
    a = _constraint_matrix(shape)
    rank = a.shape[0]
    ncells = a.shape[1]
    rhs = np.column_stack([_rhs(margs) for _, margs in instances])  # (rank, n_inst)
    costs = np.stack([np.asarray(c, dtype=float).ravel() for c, _ in instances])

    best = np.full(len(instances), np.inf)
    combos = itertools.combinations(range(ncells), rank)
    while True:
        chunk = np.array(list(itertools.islice(combos, _CHUNK)), dtype=int)
        if chunk.size == 0:
            break
        mats = a.T[chunk]                      # (m, rank, ncols=rank) rows=cells
        mats = np.swapaxes(mats, 1, 2)         # columns are the chosen cells
        dets = np.abs(np.linalg.det(mats))
        good = dets > 0.5                      # 0/1 matrices: dets are integers
        if not np.any(good):
            continue
        sols = np.linalg.solve(mats[good], rhs[None, :, :])   # (g, rank, n_inst)
        feas = np.all(sols >= -_FEAS_TOL, axis=1)             # (g, n_inst)
        cell_costs = costs[:, chunk[good]]                    # (n_inst, g, rank)
        vals = np.einsum("igr,gri->gi", cell_costs, sols)
        vals = np.where(feas, vals, np.inf)
        best = np.minimum(best, vals.min(axis=0))
    return best
