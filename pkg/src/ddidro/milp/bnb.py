"""Best-first branch and bound over binary variables."""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .simplex import simplex_solve


@dataclass
class BnbResult:
    status: str
    value: float
    x: Optional[np.ndarray]
    bound: float
    nodes: int
    incumbent_trace: list


def branch_and_bound(c, A, row_lo, row_hi, lb, ub, integrality, *, int_tol=1e-9, prune_tol=1e-9,
                     lp_tol=1e-9, node_limit=None, time_limit=None, incumbent=None,
                     lp_solver: Optional[Callable] = None) -> BnbResult:
    """Minimize ``c x`` with ``integrality`` flagging binary columns.

    Nodes are explored in order of their LP bound (ties by creation order).
    The branching variable is the most fractional binary, ties broken by the
    lowest column index.  ``incumbent`` may supply a known feasible point.
    """
    lp_solver = lp_solver or (lambda lo_, hi_: simplex_solve(c, A, row_lo, row_hi, lo_, hi_, tol=lp_tol))
    bin_ids = np.flatnonzero(integrality)
    lb = np.asarray(lb, float).copy()
    ub = np.asarray(ub, float).copy()
    lb[bin_ids] = np.maximum(lb[bin_ids], 0.0)
    ub[bin_ids] = np.minimum(ub[bin_ids], 1.0)
    start = time.perf_counter()

    best_val, best_x = math.inf, None
    if incumbent is not None:
        best_x = np.asarray(incumbent, float)
        best_val = float(c @ best_x)
    trace = []
    root = lp_solver(lb, ub)
    nodes = 1
    if root.status == "Infeasible":
        return BnbResult("Infeasible", math.inf, None, math.inf, nodes, trace)
    if root.status == "Unbounded":
        return BnbResult("Unbounded", -math.inf, None, -math.inf, nodes, trace)
    if root.status != "Optimal":
        return BnbResult(root.status, math.nan, None, -math.inf, nodes, trace)

    heap = [(root.value, 0, lb, ub, root)]
    counter = 1
    limit_hit = False
    while heap:
        bound, _, nlb, nub, res = heapq.heappop(heap)
        if bound >= best_val - prune_tol:
            continue
        xb = res.x[bin_ids]
        frac = np.abs(xb - np.round(xb))
        if frac.max(initial=0.0) <= int_tol:
            x = res.x.copy()
            x[bin_ids] = np.round(xb)
            best_val, best_x = res.value, x
            trace.append((nodes, best_val))
            continue
        if (node_limit is not None and nodes >= node_limit) or (
                time_limit is not None and time.perf_counter() - start > time_limit):
            heapq.heappush(heap, (bound, -1, nlb, nub, res))
            limit_hit = True
            break
        score = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        j = int(bin_ids[int(np.argmax(score))])
        for val in (0.0, 1.0):
            clb, cub = nlb.copy(), nub.copy()
            clb[j] = cub[j] = val
            child = lp_solver(clb, cub)
            nodes += 1
            if child.status == "Optimal" and child.value < best_val - prune_tol:
                heapq.heappush(heap, (child.value, counter, clb, cub, child))
                counter += 1
            elif child.status not in ("Optimal", "Infeasible"):
                if child.status == "Unbounded":
                    return BnbResult("Unbounded", -math.inf, None, -math.inf, nodes, trace)
                limit_hit = True
    open_bound = min((h[0] for h in heap), default=math.inf)
    bound = min(open_bound, best_val)
    if best_x is None:
        status = "LimitReached" if limit_hit else "Infeasible"
        return BnbResult(status, math.inf, None, bound, nodes, trace)
    status = "LimitReached" if limit_hit and open_bound < best_val - prune_tol else "Optimal"
    return BnbResult(status, best_val, best_x, bound, nodes, trace)
