"""Engine dispatch for LP and MILP solves.

Three engines are available:

``"highs"``
    HiGHS through ``highspy`` (default; fast and robust for the reformulations).
``"simplex"``
    The in-house dense simplex for LPs.  For models with binaries this means
    the in-house branch and bound on top of it.
``"bnb"``
    Alias of ``"simplex"`` that reads better for MILPs.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import highs as _highs
from .bnb import branch_and_bound
from .model import MilpModel
from .simplex import simplex_solve


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    LIMIT = "LimitReached"
    NUMERICAL = "NumericalError"

    def __str__(self) -> str:
        return self.value


@dataclass
class LpSolution:
    status: Status
    value: float
    primal: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    dual_value: float = math.nan
    engine: str = ""
    seconds: float = 0.0

    @property
    def duality_gap(self) -> float:
        if self.status != Status.OPTIMAL:
            return math.nan
        return abs(self.value - self.dual_value)


@dataclass
class MilpSolution:
    status: Status
    value: float
    primal: Optional[np.ndarray] = None
    gap: float = math.nan
    nodes: int = 0
    bound: float = math.nan
    engine: str = ""
    seconds: float = 0.0
    info: dict = field(default_factory=dict)

    def __getitem__(self, ids):
        return self.primal[np.asarray(ids)]


def _engine(opts, engine):
    name = (engine or getattr(opts, "engine", "highs") or "highs").lower()
    if name == "bnb":
        name = "simplex"
    if name not in ("highs", "simplex"):
        raise ValueError(f"unknown engine {name!r}")
    if name == "highs" and not _highs.available():  # pragma: no cover
        name = "simplex"
    return name


def lp_dual_value(c, A, row_lo, row_hi, lb, ub, y, const=0.0, tol=1e-7) -> float:
    """Value of the LP dual objective at multipliers ``y``.

    Each row contributes ``y_r`` times its active bound (lower when ``y_r > 0``,
    upper when ``y_r < 0``); each column contributes its reduced cost times the
    matching variable bound.  Multipliers smaller than ``tol`` that point at an
    infinite bound are treated as zero; larger ones make the value infinite,
    which then surfaces as a duality gap.
    """
    y = np.asarray(y, float)
    d = np.asarray(c, float) - A.T @ y
    total = const
    for vals, lo, hi in ((y, row_lo, row_hi), (d, lb, ub)):
        vals = vals.copy()
        vals[(vals > 0) & ~np.isfinite(lo) & (vals < tol)] = 0.0
        vals[(vals < 0) & ~np.isfinite(hi) & (vals > -tol)] = 0.0
        pos = vals > 0
        neg = vals < 0
        total += float(np.sum(vals[pos] * lo[pos])) + float(np.sum(vals[neg] * hi[neg]))
    return total


def solve_lp(model: MilpModel, opts=None, engine: Optional[str] = None) -> LpSolution:
    """Solve a model without binaries and return primal values and row duals."""
    from ..core import SolverOptions

    opts = opts or SolverOptions()
    if model.has_binaries:
        raise ValueError("solve_lp called on a model with binary variables; use solve_milp")
    name = _engine(opts, engine)
    c, A, lo, hi, lb, ub, _, const = model.to_arrays()
    t0 = time.perf_counter()
    if name == "highs":
        res = _highs.solve(c, A, lo, hi, lb, ub, feas_tol=opts.lp_feas_tol, opt_tol=opts.lp_opt_tol,
                           time_limit=opts.time_limit, seed=opts.seed)
        status, x, y, value = res.status, res.x, res.y, res.value
    else:
        res = simplex_solve(c, A, lo, hi, lb, ub, tol=opts.lp_feas_tol)
        status, x, y, value = res.status, res.x, res.y, res.value
    elapsed = time.perf_counter() - t0
    if status != "Optimal":
        val = math.inf if status == "Infeasible" else (-math.inf if status == "Unbounded" else math.nan)
        return LpSolution(Status(status), val, engine=name, seconds=elapsed)
    value = float(c @ x) + const
    dual = math.nan
    if y is not None:
        dual = lp_dual_value(c, A, lo, hi, lb, ub, y, const)
    return LpSolution(Status.OPTIMAL, value, x, y, dual, name, elapsed)


def _polish(model, c, A, lo, hi, lb, ub, integ, const, x, opts, name):
    """Round binaries of ``x``, fix them and re-solve the continuous part."""
    lb2, ub2 = lb.copy(), ub.copy()
    ids = np.flatnonzero(integ)
    rounded = np.round(x[ids])
    lb2[ids] = ub2[ids] = rounded
    if name == "highs":
        res = _highs.solve(c, A, lo, hi, lb2, ub2, feas_tol=opts.lp_feas_tol, opt_tol=opts.lp_opt_tol,
                           seed=opts.seed)
    else:
        res = simplex_solve(c, A, lo, hi, lb2, ub2, tol=opts.lp_feas_tol)
    if res.status != "Optimal":
        return None
    out = np.asarray(res.x, float).copy()
    out[ids] = rounded
    return out


def solve_milp(model: MilpModel, opts=None, engine: Optional[str] = None, start=None) -> MilpSolution:
    """Solve a mixed-binary model.

    Whatever the engine, an incumbent is polished by fixing its rounded
    binaries and re-solving the LP, so reported binaries are exactly 0 or 1
    and the continuous part is an exact LP optimum for them.  ``start`` is a
    full primal vector or a partial ``{variable id: value}`` mapping; partial
    starts are only passed to HiGHS.
    """
    from ..core import SolverOptions

    opts = opts or SolverOptions()
    name = _engine(opts, engine)
    c, A, lo, hi, lb, ub, integ, const = model.to_arrays()
    t0 = time.perf_counter()
    if not integ.any():
        lps = solve_lp(model, opts, name)
        return MilpSolution(lps.status, lps.value, lps.primal, 0.0, 0, lps.value, name,
                            time.perf_counter() - t0)
    if name == "highs":
        res = _highs.solve(c, A, lo, hi, lb, ub, integ, feas_tol=opts.lp_feas_tol, opt_tol=opts.lp_opt_tol,
                           int_tol=opts.integrality_tol, mip_gap=opts.mip_gap, abs_gap=opts.lp_opt_tol,
                           node_limit=opts.node_limit, time_limit=opts.time_limit, seed=opts.seed,
                           start=start)
        status, x, bound, gap, nodes = res.status, res.x, res.bound, res.gap, res.nodes
    else:
        res = branch_and_bound(c, A, lo, hi, lb, ub, integ, int_tol=max(opts.integrality_tol, 1e-7),
                               prune_tol=opts.lp_opt_tol, lp_tol=opts.lp_feas_tol,
                               node_limit=opts.node_limit, time_limit=opts.time_limit,
                               incumbent=None if isinstance(start, dict) else start)
        status, x, bound, nodes = res.status, res.x, res.bound, res.nodes
        gap = 0.0 if status == "Optimal" else math.nan
    info = {}
    if x is not None and status in ("Optimal", "LimitReached"):
        polished = _polish(model, c, A, lo, hi, lb, ub, integ, const, x, opts, name)
        if polished is not None:
            x = polished
        else:
            info["polish_failed"] = True  # rounded binaries only feasible within tolerance
        value = float(c @ x) + const
        if math.isfinite(bound):
            bound += const
            gap = abs(value - bound) / max(1.0, abs(value))
    else:
        value = math.inf if status in ("Infeasible", "LimitReached") else (
            -math.inf if status == "Unbounded" else math.nan)
        x = None
    elapsed = time.perf_counter() - t0
    return MilpSolution(Status(status), value, x, gap, int(nodes), bound, name, elapsed, info)
