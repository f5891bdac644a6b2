"""Dense tableau simplex for small equality-form linear programs.

Solves max c'x s.t. A x = b, x >= 0 with a two-phase method and Bland's rule,
and recovers the equality duals y from the final basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasibleError, NumericalError


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    duals: np.ndarray
    basis: np.ndarray

    def duality_gap(self, b):
        return abs(self.objective - float(np.dot(b, self.duals)))


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    piv = tab[row]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, piv)


def _run(tab, basis, n_cols, eps, max_iter):
    """Maximize the objective held in the last tableau row (stored as -c)."""
    for _ in range(max_iter):
        red = tab[-1, :n_cols]
        cand = np.flatnonzero(red < -eps)
        if cand.size == 0:
            return
        col = cand[0]  # Bland: lowest index entering
        colv = tab[:-1, col]
        pos = colv > eps
        if not np.any(pos):
            raise NumericalError("linear program is unbounded")
        ratios = np.full(colv.shape, np.inf)
        ratios[pos] = tab[:-1, -1][pos] / colv[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + eps * max(1.0, abs(best)))
        row = ties[np.argmin(basis[ties])]  # Bland: lowest basic index leaves
        _pivot(tab, row, col)
        basis[row] = col
    raise NumericalError("simplex iteration limit reached")


def solve_lp(c, A, b, eps=1e-12, max_iter=10000):
    """Maximize c'x subject to A x = b and x >= 0."""
    c = np.asarray(c, dtype=float)
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    # phase 1: artificials n..n+m-1 start basic
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -A.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = np.arange(n, n + m)
    _run(tab, basis, n + m, eps, max_iter)
    scale = max(1.0, np.abs(b).max(initial=0.0))
    if tab[-1, -1] < -1e-9 * scale:
        raise InfeasibleError("linear program is infeasible")
    # drive zero-level artificials out of the basis; drop redundant rows
    keep = np.ones(m, dtype=bool)
    for row in range(m):
        if basis[row] >= n:
            nz = np.flatnonzero(np.abs(tab[row, :n]) > 1e-9)
            if nz.size:
                _pivot(tab, row, nz[0])
                basis[row] = nz[0]
            else:
                keep[row] = False
    rows = np.flatnonzero(keep)
    # phase 2 on the original columns
    tab2 = np.zeros((rows.size + 1, n + 1))
    tab2[:-1, :n] = tab[rows, :n]
    tab2[:-1, -1] = tab[rows, -1]
    basis2 = basis[rows].copy()
    tab2[-1, :n] = -c
    for i, j in enumerate(basis2):
        tab2[-1] += c[j] * tab2[i]
    _run(tab2, basis2, n, eps, max_iter)
    x = np.zeros(n)
    x[basis2] = tab2[:-1, -1]
    x = np.maximum(x, 0.0)
    # duals from the final basis on the original (sign-restored) rows
    y = np.zeros(m)
    B = A[rows][:, basis2]
    y_rows = np.linalg.solve(B.T, c[basis2])
    y[rows] = y_rows
    y[neg] *= -1
    return LpResult(x, float(c @ x), y, basis2)
