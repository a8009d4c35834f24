"""Dense two-phase simplex for small linear programs.

Solves ``min c.x  s.t.  A x <= b,  0 <= x <= upper`` on a full tableau with
Bland's rule, which rules out cycling.  Intended for a few dozen rows.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

TOL = 1e-10


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    """Numerical breakdown (iteration limit or degenerate pivot)."""


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray
    objective: float
    infeasibility: float  # phase-one optimum, > 0 certifies infeasibility
    iterations: int


def _pivot(t, row, col):
    t[row] /= t[row, col]
    others = np.arange(t.shape[0]) != row
    t[others] -= np.outer(t[others, col], t[row])


def _run(t, basis, n_cols, tol, max_iter):
    """Minimize the cost row (last row) over the first ``n_cols`` columns.

    Returns the iteration count, or -1 if the problem is unbounded.
    """
    m = t.shape[0] - 1
    for it in range(max_iter):
        cost = t[-1, :n_cols]
        candidates = np.flatnonzero(cost < -tol)
        if candidates.size == 0:
            return it
        col = int(candidates[0])  # Bland: lowest index enters
        colv = t[:m, col]
        pos = colv > tol
        if not pos.any():
            return -1
        ratios = np.full(m, np.inf)
        ratios[pos] = t[:m, -1][pos] / colv[pos]
        best = ratios.min()
        tied = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = int(tied[np.argmin(basis[tied])])  # Bland: lowest basic index leaves
        _pivot(t, row, col)
        basis[row] = col
    raise LpError(f"simplex did not terminate in {max_iter} iterations")


def solve(c, a_ub, b_ub, upper=None, tol: float = TOL, max_iter: int = 10_000) -> LpResult:
    """Minimize ``c.x`` subject to ``a_ub x <= b_ub`` and ``0 <= x <= upper``.

    ``upper`` entries may be ``inf``.  Returns an :class:`LpResult`; on
    infeasibility ``x`` is the phase-one point (closest to feasibility in the
    summed-violation sense).
    """
    c = np.asarray(c, float)
    n = c.size
    a = np.asarray(a_ub, float).reshape(-1, n)
    b = np.asarray(b_ub, float).ravel()
    if a.shape[0] != b.size:
        raise ValueError("a_ub and b_ub disagree in row count")
    if upper is not None:
        upper = np.broadcast_to(np.asarray(upper, float), (n,))
        fin = np.isfinite(upper)
        a = np.vstack([a, np.eye(n)[fin]])
        b = np.concatenate([b, upper[fin]])
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise ValueError("non-finite LP data")
    m = a.shape[0]
    # rows: a x + s = b; flip rows with b < 0 and give them an artificial
    sign = np.where(b < 0, -1.0, 1.0)
    neg = np.flatnonzero(b < 0)
    n_art = neg.size
    n_struct = n + m
    t = np.zeros((m + 1, n_struct + n_art + 1))
    t[:m, :n] = a * sign[:, None]
    t[:m, n:n_struct] = np.diag(sign)
    t[:m, -1] = b * sign
    basis = np.arange(n, n_struct).copy()
    for j, r in enumerate(neg):
        t[r, n_struct + j] = 1.0
        basis[r] = n_struct + j
    iters = 0
    infeas = 0.0
    if n_art:
        t[-1, n_struct:n_struct + n_art] = 1.0
        for r in neg:
            t[-1] -= t[r]
        it = _run(t, basis, n_struct + n_art, tol, max_iter)
        if it < 0:
            raise LpError("phase one reported unbounded")
        iters += it
        infeas = max(0.0, -t[-1, -1])
        scale = max(1.0, np.abs(b).max())
        x = np.zeros(n_struct + n_art)
        x[basis] = t[:m, -1]
        if infeas > 1e-9 * scale:
            return LpResult(LpStatus.INFEASIBLE, x[:n].copy(), float("nan"), infeas, iters)
        # drive zero-level artificials out of the basis
        for r in np.flatnonzero(basis >= n_struct):
            nz = np.flatnonzero(np.abs(t[r, :n_struct]) > tol)
            if nz.size:
                _pivot(t, r, int(nz[0]))
                basis[r] = int(nz[0])
        keep = basis < n_struct
        t = np.vstack([t[:m][keep], t[-1:]])
        basis = basis[keep]
        t = np.delete(t, np.s_[n_struct:n_struct + n_art], axis=1)
        m = t.shape[0] - 1
    t[-1] = 0.0
    t[-1, :n] = c
    for r, j in enumerate(basis):
        if t[-1, j] != 0.0:
            t[-1] -= t[-1, j] * t[r]
    it = _run(t, basis, n_struct, tol, max_iter)
    if it < 0:
        return LpResult(LpStatus.UNBOUNDED, np.full(n, np.nan), -np.inf, infeas, iters)
    iters += it
    x = np.zeros(n_struct)
    x[basis] = t[:m, -1]
    x = np.maximum(x[:n], 0.0)
    return LpResult(LpStatus.OPTIMAL, x, float(c @ x), infeas, iters)
