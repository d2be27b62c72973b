"""Linear programming for kernel feasibility problems.

Problems have the form::

    minimize  c @ x   subject to  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  x >= 0

The default solver is a dense two-phase tableau simplex.  Entering
columns follow the steepest reduced cost, with a switch to Bland's
lowest-index rule during degenerate stretches; leaving rows are always
chosen by lowest basis index.  The returned vertex is therefore a
deterministic function of the input.  Problems whose
tableau would not fit comfortably in memory go to HiGHS through scipy.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import LPError

log = logging.getLogger(__name__)

DENSE_CELL_LIMIT = 4_000_000


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    status: str  # "optimal" | "infeasible" | "unbounded"
    method: str
    iterations: int = 0


def _dense(a):
    if a is None:
        return None
    return a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)


def _pivot(t, r, j):
    t[r] /= t[r, j]
    col = t[:, j].copy()
    col[r] = 0.0
    nz = np.nonzero(col)[0]
    if nz.size:
        t[nz] -= np.outer(col[nz], t[r])


def _run_phase(t, basis, n_enter, eps, max_iter, stall=50):
    """Primal simplex on tableau ``t`` whose last row holds reduced costs.

    Only columns ``< n_enter`` may enter.  The entering column is the most
    negative reduced cost until ``stall`` consecutive degenerate pivots
    occur; from then on Bland's lowest-index rule is used until the
    objective moves again, which rules out cycling.  Returns
    (status, iterations).
    """
    m = t.shape[0] - 1
    it = 0
    degenerate = 0
    while True:
        cost = t[m, :n_enter]
        cand = np.nonzero(cost < -eps)[0]
        if cand.size == 0:
            return "optimal", it
        j = int(cand[0]) if degenerate >= stall else int(cand[np.argmin(cost[cand])])
        col = t[:m, j]
        pos = np.nonzero(col > eps)[0]
        if pos.size == 0:
            return "unbounded", it
        # rounding can leave basic values at -1e-17; treat them as zero so
        # a degenerate pivot never increases the objective
        ratios = np.maximum(t[pos, -1], 0.0) / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + eps * max(1.0, abs(best))]
        r = int(ties[np.argmin(basis[ties])])
        degenerate = degenerate + 1 if best <= eps else 0
        _pivot(t, r, j)
        basis[r] = j
        it += 1
        if it > max_iter:
            raise LPError(f"simplex exceeded {max_iter} pivots")


def simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, eps=1e-11, max_iter=200_000):
    """Dense two-phase simplex; see :func:`_run_phase` for the pivot rules."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = _dense(A_ub)
    A_eq = _dense(A_eq)
    A_ub = np.zeros((0, n)) if A_ub is None else A_ub
    A_eq = np.zeros((0, n)) if A_eq is None else A_eq
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: [x (n) | slacks (m_ub) | artificials (n_art)] + rhs
    flip_ub = b_ub < 0
    flip_eq = b_eq < 0
    need_art = np.concatenate([flip_ub, np.ones(m_eq, dtype=bool)])
    art_rows = np.nonzero(need_art)[0]
    n_art = art_rows.size
    width = n + m_ub + n_art
    t = np.zeros((m + 1, width + 1))
    sign_ub = np.where(flip_ub, -1.0, 1.0)
    sign_eq = np.where(flip_eq, -1.0, 1.0)
    t[:m_ub, :n] = A_ub * sign_ub[:, None]
    t[np.arange(m_ub), n + np.arange(m_ub)] = sign_ub
    t[:m_ub, -1] = b_ub * sign_ub
    t[m_ub:m, :n] = A_eq * sign_eq[:, None]
    t[m_ub:m, -1] = b_eq * sign_eq
    basis = np.empty(m, dtype=np.int64)
    basis[:m_ub] = n + np.arange(m_ub)
    for k, r in enumerate(art_rows):
        t[r, n + m_ub + k] = 1.0
        basis[r] = n + m_ub + k

    iters = 0
    if n_art:
        t[m, n + m_ub:width] = 1.0
        t[m] -= t[art_rows].sum(axis=0)
        status, it = _run_phase(t, basis, width, eps, max_iter)
        iters += it
        scale = max(1.0, np.abs(t[:m, -1]).max(initial=0.0))
        if -t[m, -1] > 1e-9 * scale:
            return LPResult(np.full(n, np.nan), np.inf, "infeasible", "dense-simplex", iters)
        # drive zero-level artificials out of the basis; drop redundant rows
        keep = np.ones(m + 1, dtype=bool)
        for r in range(m):
            if basis[r] >= n + m_ub:
                row = np.abs(t[r, : n + m_ub])
                cand = np.nonzero(row > 1e-9)[0]
                if cand.size:
                    j = int(cand[0])
                    _pivot(t, r, j)
                    basis[r] = j
                else:
                    keep[r] = False
        t = t[keep]
        basis = basis[keep[:m]]
        t = np.delete(t, np.s_[n + m_ub : width], axis=1)
        m = t.shape[0] - 1
    width = n + m_ub
    t[m, :] = 0.0
    t[m, :n] = c
    cb = np.where(basis < n, c[np.minimum(basis, n - 1)], 0.0)
    t[m] -= cb @ t[:m]
    status, it = _run_phase(t, basis, width, eps, max_iter)
    iters += it
    if status != "optimal":
        return LPResult(np.full(n, np.nan), -np.inf, status, "dense-simplex", iters)
    x = np.zeros(width)
    x[basis] = t[:m, -1]
    x = x[:n]
    return LPResult(x, float(c @ x), "optimal", "dense-simplex", iters)


def highs(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None):
    from scipy.optimize import linprog

    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs",
        options={"presolve": True},
    )
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status)
    if status is None:
        raise LPError(f"HiGHS failed: {res.message}")
    if status != "optimal":
        return LPResult(np.full(len(c), np.nan), np.inf, status, "highs", int(res.nit))
    return LPResult(np.asarray(res.x), float(res.fun), status, "highs", int(res.nit))


def solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, method="auto"):
    """Dispatch to the dense simplex or to HiGHS.

    ``method="auto"`` uses the dense simplex when its tableau has at most
    ``DENSE_CELL_LIMIT`` cells.
    """
    if method == "auto":
        rows = sum(0 if a is None else a.shape[0] if hasattr(a, "shape") else len(a)
                   for a in (A_ub, A_eq))
        cols = len(c) + rows
        method = "dense" if rows * cols <= DENSE_CELL_LIMIT else "highs"
    if method == "dense":
        return simplex(c, A_ub, b_ub, A_eq, b_eq)
    if method == "highs":
        log.debug("solving LP with HiGHS (%d variables)", len(c))
        return highs(c, A_ub, b_ub, A_eq, b_eq)
    raise ValueError(f"unknown LP method {method!r}")
