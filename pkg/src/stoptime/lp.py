"""Dense two-phase primal simplex with Bland's rule.

Every LP built in this package has at most a few hundred rows, so a plain tableau is
enough and keeps results reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    x: np.ndarray | None
    fun: float
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    factor = tab[:, col].copy()
    factor[row] = 0.0
    tab -= np.outer(factor, tab[row])


def _run(tab: np.ndarray, basis: list[int], n_cols: int, max_iter: int, start: int = 0):
    """Minimise the objective stored in the last row over columns ``< n_cols``.

    Returns (status, iterations).  The objective row holds reduced costs; the last
    column is the right-hand side.
    """
    m = len(basis)
    it = 0
    basis_arr = np.asarray(basis)
    while it < max_iter:
        negative = np.flatnonzero(tab[m, :n_cols] < -PIVOT_TOL)
        if negative.size == 0:
            return "optimal", it + start
        entering = int(negative[0])  # Bland: lowest index with negative reduced cost
        column = tab[:m, entering]
        eligible = np.flatnonzero(column > PIVOT_TOL)
        if eligible.size == 0:
            return "unbounded", it + start
        ratios = tab[eligible, -1] / column[eligible]
        tied = eligible[ratios <= ratios.min() + 1e-14]
        best_row = int(tied[np.argmin(basis_arr[tied])])  # Bland tie-break on basic index
        _pivot(tab, best_row, entering)
        basis[best_row] = entering
        basis_arr[best_row] = entering
        it += 1
    return "iteration_limit", it + start


def linprog(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    max_iter: int = 20000,
) -> LPResult:
    """Minimise ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: x (n) | slacks (m_ub) | artificials (as needed) | rhs
    rows = np.zeros((m, n + m_ub))
    rows[:m_ub, :n] = A_ub
    rows[:m_ub, n:] = np.eye(m_ub)
    rows[m_ub:, :n] = A_eq
    rhs = np.concatenate([b_ub, b_eq])
    neg = rhs < 0
    rows[neg] *= -1
    rhs = np.abs(rhs)

    basis = [-1] * m
    needs_art = []
    for i in range(m):
        if i < m_ub and not neg[i]:
            basis[i] = n + i
        else:
            needs_art.append(i)
    n_art = len(needs_art)
    width = n + m_ub + n_art
    tab = np.zeros((m + 1, width + 1))
    tab[:m, : n + m_ub] = rows
    tab[:m, -1] = rhs
    for k, i in enumerate(needs_art):
        tab[i, n + m_ub + k] = 1.0
        basis[i] = n + m_ub + k

    iterations = 0
    if n_art:
        # phase 1: minimise the sum of artificials
        tab[m, n + m_ub : width] = 1.0
        for i in needs_art:
            tab[m] -= tab[i]
        status, iterations = _run(tab, basis, width, max_iter)
        if status == "iteration_limit":
            return LPResult(status, None, np.nan, iterations)
        if -tab[m, -1] > 1e-9 * max(1.0, float(rhs.max(initial=0.0))):
            return LPResult("infeasible", None, np.nan, iterations)
        # drive artificials out of the basis; drop rows that are redundant
        keep = []
        for i in range(m):
            if basis[i] >= n + m_ub:
                candidates = np.nonzero(np.abs(tab[i, : n + m_ub]) > PIVOT_TOL)[0]
                if candidates.size:
                    _pivot(tab, i, int(candidates[0]))
                    basis[i] = int(candidates[0])
                    keep.append(i)
            else:
                keep.append(i)
        tab = np.vstack([tab[keep], tab[m : m + 1]])
        basis = [basis[i] for i in keep]
        m = len(keep)
        tab = np.delete(tab, np.s_[n + m_ub : width], axis=1)
        width = n + m_ub

    # phase 2 objective in reduced form
    tab[m, :] = 0.0
    tab[m, :n] = c
    for i, j in enumerate(basis):
        if tab[m, j] != 0.0:
            tab[m] -= tab[m, j] * tab[i]
    status, iterations = _run(tab, basis, width, max_iter - iterations, start=iterations)
    if status != "optimal":
        return LPResult(status, None, np.nan, iterations)
    x = np.zeros(width)
    for i, j in enumerate(basis):
        x[j] = tab[i, -1]
    sol = x[:n]
    return LPResult("optimal", sol, float(c @ sol), iterations)
