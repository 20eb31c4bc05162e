"""Adapter over the HiGHS solver (via ``highspy``)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

try:  # pragma: no cover - import guard exercised only without highspy
    import highspy
except ImportError:  # pragma: no cover
    highspy = None


def available() -> bool:
    return highspy is not None


@dataclass
class HighsResult:
    status: str
    value: float
    x: Optional[np.ndarray]
    y: Optional[np.ndarray]
    bound: float
    gap: float
    nodes: int


_STATUS = {
    "kOptimal": "Optimal",
    "kInfeasible": "Infeasible",
    "kUnbounded": "Unbounded",
    "kUnboundedOrInfeasible": "UnboundedOrInfeasible",
    "kTimeLimit": "LimitReached",
    "kIterationLimit": "LimitReached",
    "kSolutionLimit": "LimitReached",
    "kInterrupt": "LimitReached",
    "kHighsInterrupt": "LimitReached",
    "kMemoryLimit": "LimitReached",
    "kModelEmpty": "Optimal",
}


def _inf(a):
    a = np.asarray(a, float).copy()
    a[a == math.inf] = highspy.kHighsInf
    a[a == -math.inf] = -highspy.kHighsInf
    return a


def solve(c, A, row_lo, row_hi, lb, ub, integrality=None, *, feas_tol=1e-9, opt_tol=1e-9,
          int_tol=1e-9, mip_gap=1e-9, abs_gap=1e-9, node_limit=None, time_limit=None, seed=0,
          start=None, presolve=True) -> HighsResult:
    if highspy is None:
        raise RuntimeError("highspy is not installed; use engine='simplex' or 'bnb'")
    n = len(c)
    A = sp.csc_matrix(A)
    lp = highspy.HighsLp()
    lp.num_col_ = n
    lp.num_row_ = A.shape[0]
    lp.col_cost_ = np.asarray(c, float)
    lp.col_lower_ = _inf(lb)
    lp.col_upper_ = _inf(ub)
    lp.row_lower_ = _inf(row_lo)
    lp.row_upper_ = _inf(row_hi)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = A.indptr.astype(np.int32)
    lp.a_matrix_.index_ = A.indices.astype(np.int32)
    lp.a_matrix_.value_ = A.data.astype(float)
    is_mip = integrality is not None and bool(np.any(integrality))
    if is_mip:
        lp.integrality_ = [highspy.HighsVarType.kInteger if f else highspy.HighsVarType.kContinuous
                           for f in integrality]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", int(seed))
    h.setOptionValue("primal_feasibility_tolerance", max(float(feas_tol), 1e-10))
    h.setOptionValue("dual_feasibility_tolerance", max(float(opt_tol), 1e-10))
    if not presolve:
        h.setOptionValue("presolve", "off")
    if is_mip:
        h.setOptionValue("mip_feasibility_tolerance", max(float(int_tol), 1e-10))
        h.setOptionValue("mip_rel_gap", float(mip_gap))
        h.setOptionValue("mip_abs_gap", float(abs_gap))
        if node_limit is not None:
            h.setOptionValue("mip_max_nodes", int(node_limit))
    if time_limit is not None:
        h.setOptionValue("time_limit", float(time_limit))
    h.passModel(lp)
    if start is not None and is_mip:
        if isinstance(start, dict):
            idx = np.array(sorted(start), dtype=np.int32)
            h.setSolution(len(idx), idx, np.array([start[i] for i in idx.tolist()], float))
        else:
            h.setSolution(n, np.arange(n, dtype=np.int32), np.asarray(start, float))
    h.run()
    name = str(h.getModelStatus()).split(".")[-1]
    status = _STATUS.get(name, "NumericalError")
    if status == "UnboundedOrInfeasible" and presolve:
        return solve(c, A, row_lo, row_hi, lb, ub, integrality, feas_tol=feas_tol, opt_tol=opt_tol,
                     int_tol=int_tol, mip_gap=mip_gap, abs_gap=abs_gap, node_limit=node_limit,
                     time_limit=time_limit, seed=seed, start=start, presolve=False)
    if status == "UnboundedOrInfeasible":
        status = "Infeasible"
    info = h.getInfo()
    sol = h.getSolution()
    x = np.asarray(sol.col_value, float) if sol.value_valid else None
    y = np.asarray(sol.row_dual, float) if (sol.dual_valid and not is_mip) else None
    value = float(info.objective_function_value) if x is not None else math.nan
    if is_mip:
        bound = float(info.mip_dual_bound)
        gap = float(info.mip_gap)
        nodes = int(info.mip_node_count)
    else:
        bound, gap, nodes = value, 0.0, 0
    if status == "LimitReached" and x is None:
        value = math.inf
    return HighsResult(status, value, x, y, bound, gap, nodes)
