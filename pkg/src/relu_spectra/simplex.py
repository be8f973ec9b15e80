"""Dense two-phase primal simplex for small standard-form LPs.

Solves ``min c.z  s.t.  A z = b, z >= 0`` on a full tableau. Pivoting uses
Bland's rule (lowest eligible index enters, lowest basis index leaves on
ratio ties), which cannot cycle.
"""

import numpy as np

from .errors import InfeasibleError, UnboundedError

PIVOT_TOL = 1e-12


def _pivot(tableau, basis, row, col):
    tableau[row] /= tableau[row, col]
    others = np.arange(tableau.shape[0]) != row
    tableau[others] -= np.outer(tableau[others, col], tableau[row])
    basis[row] = col


def _run(tableau, basis, n_allowed, max_iter):
    """Iterate on ``tableau`` whose last row holds reduced costs."""
    n_rows = tableau.shape[0] - 1
    for _ in range(max_iter):
        costs = tableau[-1, :n_allowed]
        entering = np.flatnonzero(costs < -PIVOT_TOL)
        if entering.size == 0:
            return
        col = int(entering[0])
        column = tableau[:n_rows, col]
        eligible = np.flatnonzero(column > PIVOT_TOL)
        if eligible.size == 0:
            raise UnboundedError(f"objective unbounded along column {col}")
        ratios = tableau[eligible, -1] / column[eligible]
        best = ratios.min()
        ties = eligible[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tableau, basis, row, col)
    raise RuntimeError(f"simplex exceeded {max_iter} iterations")


def simplex_solve(c, a_eq, b_eq, max_iter=10_000):
    """Return ``(optimum, z)`` for ``min c.z  s.t.  a_eq z = b_eq, z >= 0``."""
    c = np.asarray(c, dtype=np.float64)
    a = np.array(a_eq, dtype=np.float64, ndmin=2)
    b = np.array(b_eq, dtype=np.float64).reshape(-1)
    n_rows, n_vars = a.shape
    flip = b < 0
    a[flip] *= -1
    b[flip] *= -1

    # phase 1: artificial variables n_vars .. n_vars + n_rows - 1
    tableau = np.zeros((n_rows + 1, n_vars + n_rows + 1))
    tableau[:n_rows, :n_vars] = a
    tableau[:n_rows, n_vars : n_vars + n_rows] = np.eye(n_rows)
    tableau[:n_rows, -1] = b
    tableau[-1, :n_vars] = -a.sum(axis=0)
    tableau[-1, -1] = -b.sum()
    basis = list(range(n_vars, n_vars + n_rows))
    _run(tableau, basis, n_vars + n_rows, max_iter)
    if -tableau[-1, -1] > 1e-9 * max(1.0, b.sum()):
        raise InfeasibleError("no point satisfies the equality constraints")

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for row in range(n_rows):
        if basis[row] >= n_vars:
            nz = np.flatnonzero(np.abs(tableau[row, :n_vars]) > PIVOT_TOL)
            if nz.size == 0:
                continue
            _pivot(tableau, basis, row, int(nz[0]))
        keep.append(row)
    rows = keep + [n_rows]
    tableau = np.hstack([tableau[rows, :n_vars], tableau[rows, -1:]])
    basis = [basis[r] for r in keep]

    # phase 2: reduced costs of the original objective
    tableau[-1, :] = 0.0
    tableau[-1, :n_vars] = c
    for row, var in enumerate(basis):
        tableau[-1] -= c[var] * tableau[row]
    _run(tableau, basis, n_vars, max_iter)

    z = np.zeros(n_vars)
    for row, var in enumerate(basis):
        z[var] = tableau[row, -1]
    return float(c @ z), z
