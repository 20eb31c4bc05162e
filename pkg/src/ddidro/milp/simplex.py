"""Dense two-phase primal simplex on a full tableau.

The solver is meant for small models (oracles and unit tests) where an
auditable reference engine matters more than speed.  It converts the bounded,
ranged input form

    min c x   s.t.  row_lo <= A x <= row_hi,   lb <= x <= ub

to standard form ``min c' s, A' s = b', s >= 0`` and runs Dantzig pricing with
a switch to Bland's rule after a streak of degenerate pivots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class SimplexResult:
    status: str
    value: float = math.nan
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    iterations: int = 0
    info: dict = field(default_factory=dict)


class _Tableau:
    def __init__(self, T, basis, tol, max_iter, bland_after):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.max_iter = max_iter
        self.bland_after = bland_after
        self.iterations = 0

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.flatnonzero(np.abs(col) > 0.0)
        if len(nz):
            T[nz] -= np.outer(col[nz], T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j

    def run(self, allowed):
        """Optimize the cost row (last row) over columns flagged in ``allowed``."""
        T, tol = self.T, self.tol
        m = T.shape[0] - 1
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                return "LimitReached"
            d = T[-1, :-1]
            cand = np.flatnonzero(allowed & (d < -tol))
            if len(cand) == 0:
                return "Optimal"
            bland = degenerate >= self.bland_after
            j = int(cand[0]) if bland else int(cand[np.argmin(d[cand])])
            colj = T[:m, j]
            pos = np.flatnonzero(colj > tol)
            if len(pos) == 0:
                return "Unbounded"
            ratios = T[pos, -1] / colj[pos]
            best = ratios.min()
            ties = pos[ratios <= best + tol * max(1.0, abs(best))]
            if bland:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(ties[np.argmax(colj[ties])])
            degenerate = degenerate + 1 if T[r, -1] <= tol else 0
            self.pivot(r, j)
            self.iterations += 1


def simplex_solve(c, A, row_lo, row_hi, lb, ub, *, tol: float = 1e-9, max_iter: int = 50_000,
                  bland_after: int = 50) -> SimplexResult:
    """Solve a bounded LP with the dense two-phase simplex.

    Returns a :class:`SimplexResult` whose ``y`` holds one multiplier per row
    with the convention ``c - A^T y`` = reduced costs (``y >= 0`` on active
    lower row bounds and ``y <= 0`` on active upper row bounds).
    """
    c = np.asarray(c, float).reshape(-1)
    n = c.shape[0]
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, float).reshape(-1, n)
    row_lo = np.asarray(row_lo, float).reshape(-1)
    row_hi = np.asarray(row_hi, float).reshape(-1)
    lb = np.asarray(lb, float).reshape(-1)
    ub = np.asarray(ub, float).reshape(-1)
    if np.any(lb > ub) or np.any(row_lo > row_hi):
        return SimplexResult("Infeasible")

    # variable substitution x = offset + M s
    cols, offset = [], np.zeros(n)
    var_map = []  # per original var: list of (std col, sign)
    bound_rows = []  # (std col, upper) for finite boxes
    ns = 0
    for j in range(n):
        if lb[j] == ub[j]:
            # fixed variables become constants; keeping them as columns with
            # zero-width bound rows makes node LPs in branch and bound very degenerate
            offset[j] = lb[j]
            var_map.append([])
        elif math.isfinite(lb[j]):
            offset[j] = lb[j]
            var_map.append([(ns, 1.0)])
            if math.isfinite(ub[j]):
                bound_rows.append((ns, ub[j] - lb[j]))
            ns += 1
        elif math.isfinite(ub[j]):
            offset[j] = ub[j]
            var_map.append([(ns, -1.0)])
            ns += 1
        else:
            var_map.append([(ns, 1.0), (ns + 1, -1.0)])
            ns += 2
    M = np.zeros((n, ns))
    for j, entries in enumerate(var_map):
        for s, sign in entries:
            M[j, s] = sign
    As = A @ M
    shift = A @ offset

    # rows: (coef over std cols, kind, rhs, origin row or -1, sign)
    rows = []
    for r in range(A.shape[0]):
        lo, hi = row_lo[r] - shift[r], row_hi[r] - shift[r]
        if lo == hi:
            rows.append((As[r], "==", hi, r))
            continue
        if math.isfinite(hi):
            rows.append((As[r], "<=", hi, r))
        if math.isfinite(lo):
            rows.append((As[r], ">=", lo, r))
    for s, width in bound_rows:
        e = np.zeros(ns)
        e[s] = 1.0
        rows.append((e, "<=", width, -1))

    m = len(rows)
    n_slack = sum(1 for row in rows if row[1] != "==")
    n_tot = ns + n_slack
    Astd = np.zeros((m, n_tot))
    bstd = np.zeros(m)
    row_sign = np.ones(m)
    k = ns
    for i, (coef, kind, rhs, _) in enumerate(rows):
        Astd[i, :ns] = coef
        if kind == "<=":
            Astd[i, k] = 1.0
            k += 1
        elif kind == ">=":
            Astd[i, k] = -1.0
            k += 1
        bstd[i] = rhs
        if rhs < 0:
            Astd[i] *= -1.0
            bstd[i] *= -1.0
            row_sign[i] = -1.0
    cstd = np.zeros(n_tot)
    cstd[:ns] = M.T @ c

    # phase 1 with one artificial per row
    T = np.zeros((m + 1, n_tot + m + 1))
    T[:m, :n_tot] = Astd
    T[:m, n_tot:n_tot + m] = np.eye(m)
    T[:m, -1] = bstd
    T[-1, :n_tot] = -Astd.sum(axis=0)
    T[-1, -1] = -bstd.sum()
    basis = list(range(n_tot, n_tot + m))
    tab = _Tableau(T, basis, tol, max_iter, bland_after)
    allowed = np.ones(n_tot + m, bool)
    status = tab.run(allowed)
    if status == "LimitReached":
        return SimplexResult("LimitReached", iterations=tab.iterations)
    scale = 1.0 + float(np.abs(bstd).max(initial=0.0))
    if -T[-1, -1] > 1e3 * tol * scale:
        return SimplexResult("Infeasible", iterations=tab.iterations)

    # drive artificials out of the basis, dropping redundant rows
    keep = np.ones(m, bool)
    for r in range(m):
        if tab.basis[r] >= n_tot:
            cand = np.flatnonzero(np.abs(T[r, :n_tot]) > 1e3 * tol)
            if len(cand):
                tab.pivot(r, int(cand[np.argmax(np.abs(T[r, cand]))]))
            else:
                keep[r] = False

    # phase 2
    T[-1, :] = 0.0
    T[-1, :n_tot] = cstd
    for r in range(m):
        if keep[r]:
            T[-1] -= cstd[tab.basis[r]] * T[r]
    allowed = np.zeros(n_tot + m, bool)
    allowed[:n_tot] = True
    # rows that were dropped keep an artificial basic at zero; forbid it re-entering
    status = tab.run(allowed)
    if status != "Optimal":
        return SimplexResult(status, iterations=tab.iterations)

    # recover primal by re-solving with the final basis for accuracy
    rows_kept = np.flatnonzero(keep)
    bas = np.array([tab.basis[r] for r in rows_kept], dtype=int)
    B = Astd[np.ix_(rows_kept, bas)]
    try:
        xB = np.linalg.solve(B, bstd[rows_kept])
        yB = np.linalg.solve(B.T, cstd[bas])
    except np.linalg.LinAlgError:
        return SimplexResult("NumericalError", iterations=tab.iterations)
    s = np.zeros(n_tot)
    s[bas] = xB
    if np.any(s < -1e3 * tol * scale):
        return SimplexResult("NumericalError", iterations=tab.iterations)
    s = np.maximum(s, 0.0)
    x = offset + M @ s[:ns]

    y_std = np.zeros(m)
    y_std[rows_kept] = yB
    y_std *= row_sign
    y = np.zeros(A.shape[0])
    for i, (_, _, _, origin) in enumerate(rows):
        if origin >= 0:
            y[origin] += y_std[i]
    value = float(c @ x)
    return SimplexResult("Optimal", value, x, y, tab.iterations)
