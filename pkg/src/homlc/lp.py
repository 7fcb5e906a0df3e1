"""Dense two-phase simplex for small linear programs.

The programs solved here (Minkowski functionals of point hulls) have a few
dozen columns and ``p + 1`` rows, so a dense tableau with Bland's rule is
both fast enough and fully deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError, SolverError

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    value: float
    status: str  # "optimal" | "infeasible" | "unbounded"
    iterations: int


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    nz = np.nonzero(colvals)[0]
    if nz.size:
        T[nz] -= np.outer(colvals[nz], T[row])
    basis[row] = col


def _run(T, basis, ncols, tol, max_iter):
    """Maximise the objective held in the last row of ``T``.

    The last row stores reduced costs ``c_j - z_j``; an entering column needs
    a strictly positive entry. Bland's rule on both the entering and leaving
    choice rules out cycling on degenerate vertices.
    """
    m = T.shape[0] - 1
    it = 0
    while True:
        cost = T[-1, :ncols]
        cand = np.nonzero(cost > tol)[0]
        if cand.size == 0:
            return "optimal", it
        if it >= max_iter:
            raise SolverError("simplex iteration limit reached", {"iterations": it})
        col = int(cand[0])
        a = T[:m, col]
        pos = np.nonzero(a > tol)[0]
        if pos.size == 0:
            return "unbounded", it
        ratios = T[pos, -1] / a[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        row = int(ties[np.argmin(basis[ties])])
        _pivot(T, basis, row, col)
        it += 1


def linprog_max(c, A_eq, b_eq, tol=FEAS_TOL, max_iter=10_000):
    """Solve ``max c @ x`` subject to ``A_eq @ x == b_eq`` and ``x >= 0``.

    Parameters
    ----------
    c : array_like, shape (n,)
    A_eq : array_like, shape (m, n)
    b_eq : array_like, shape (m,)
    tol : float
        Feasibility and optimality tolerance.

    Returns
    -------
    LPResult
        ``status`` is ``"infeasible"`` when phase one cannot drive the
        artificial variables below ``tol``.
    """
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float, ndmin=2)
    b = np.array(b_eq, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise InputError("inconsistent LP dimensions")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise InputError("LP data must be finite")

    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase one: artificials on every row
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = A.sum(axis=0)
    T[-1, -1] = b.sum()
    basis = np.arange(n, n + m)
    _, it1 = _run(T, basis, n, tol, max_iter)
    if T[-1, -1] > tol * max(1.0, b.sum()):
        return LPResult(np.full(n, np.nan), -np.inf, "infeasible", it1)

    # drive remaining (zero-level) artificials out of the basis
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n:
            nz = np.nonzero(np.abs(T[r, :n]) > tol)[0]
            if nz.size:
                _pivot(T, basis, r, int(nz[0]))
            else:
                keep[r] = False
    T = np.vstack([T[:m][keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = basis[keep]
    mm = T.shape[0] - 1

    # phase two: reduced costs of c against the current basis
    T[-1, :n] = c
    T[-1, -1] = 0.0
    cb = c[basis]
    T[-1] -= cb @ T[:mm]
    status, it2 = _run(T, basis, n, tol, max_iter)
    x = np.zeros(n)
    x[basis] = T[:mm, -1]
    if status == "unbounded":
        return LPResult(x, np.inf, status, it1 + it2)
    return LPResult(x, float(c @ x), status, it1 + it2)


def phase2_batch(T, basis, ncols, tol=FEAS_TOL, max_iter=10_000):
    """Run Bland's-rule phase two on a stack of tableaux in place.

    ``T`` has shape ``(B, m + 1, ncols + 1)`` with a feasible basis already
    installed: rows ``:m`` hold ``B^-1 [A | b]`` and the last row the reduced
    costs. Every tableau follows exactly the pivots the scalar solver would
    take; finished tableaux are simply left alone.

    Returns
    -------
    status : ndarray of str
        ``"optimal"`` or ``"unbounded"`` per tableau.
    """
    nb, m1, _ = T.shape
    m = m1 - 1
    status = np.full(nb, "optimal", dtype=object)
    active = np.arange(nb)
    for _ in range(max_iter):
        cost = T[active, -1, :ncols]
        cand = cost > tol
        has = cand.any(axis=1)
        active = active[has]
        if active.size == 0:
            return status
        col = np.argmax(cand[has], axis=1)
        a = T[active, :m, col]
        pos = a > tol
        unb = ~pos.any(axis=1)
        if np.any(unb):
            status[active[unb]] = "unbounded"
            active, col, a, pos = active[~unb], col[~unb], a[~unb], pos[~unb]
            if active.size == 0:
                return status
        rhs = T[active, :m, -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(pos, rhs / np.where(pos, a, 1.0), np.inf)
        best = ratios.min(axis=1, keepdims=True)
        ties = pos & (ratios <= best + tol * np.maximum(1.0, np.abs(best)))
        row = np.argmin(np.where(ties, basis[active], np.iinfo(np.int64).max), axis=1)
        sub = T[active]
        k = np.arange(active.size)
        prow = sub[k, row, :] / sub[k, row, col][:, None]
        colvals = sub[k, :, col]
        sub -= colvals[:, :, None] * prow[:, None, :]
        sub[k, row, :] = prow
        T[active] = sub
        basis[active, row] = col
    raise SolverError("batched simplex iteration limit reached", {"active": int(active.size)})
