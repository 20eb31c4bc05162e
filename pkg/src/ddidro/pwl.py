"""Piecewise-linear convex objectives and column-and-constraint generation.

The cost of implementing policy ``y`` in scenario ``xi`` is
``max_i xi . (C^i x + D^i w + Q^i y)``.  Worst-case absolute regret over
simplex-shaped hindsight sets has this form, which is what
:func:`wcar_to_pwl` builds.

Two exact solution routes are provided.  :func:`solve_pwl_monolithic`
dualizes the worst case once per piece assignment ``i`` in ``I^K``.
:func:`ccg_solve` only generates the assignments it needs, alternating a
relaxed master problem with a separation MILP that returns the worst-case
cost of the master's decisions.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import _build
from .core import DdidInstance, SolverOptions, default_big_m
from .milp import INF, LinExpr, MilpModel, solve_milp
from ._build import rounded as _r
from .solution import KAdaptSolution


@dataclass(frozen=True)
class PwlObjective:
    """Maximum of linear pieces ``xi . (C^i x + D^i w + Q^i y)`` (to be minimized)."""

    pieces: tuple

    def __post_init__(self):
        ps = []
        for p in self.pieces:
            C, D, Q = (np.array(a, dtype=float) for a in p)
            for a in (C, D, Q):
                a.setflags(write=False)
            ps.append((C, D, Q))
        if not ps:
            raise ValueError("a piecewise-linear objective needs at least one piece")
        shapes = {(C.shape, D.shape, Q.shape) for C, D, Q in ps}
        if len(shapes) != 1:
            raise ValueError("all pieces must share the same shapes")
        object.__setattr__(self, "pieces", tuple(ps))

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    def cost_vector(self, i: int, x, w, y) -> np.ndarray:
        C, D, Q = self.pieces[i]
        return C @ np.asarray(x, float) + D @ np.asarray(w, float) + Q @ np.asarray(y, float)

    def value(self, xi, x, w, y) -> float:
        xi = np.asarray(xi, float)
        return max(float(xi @ self.cost_vector(i, x, w, y)) for i in range(self.n_pieces))

    def check(self, inst: DdidInstance) -> "PwlObjective":
        C, D, Q = self.pieces[0]
        want = ((inst.n_xi, inst.n_x), (inst.n_xi, inst.n_xi), (inst.n_xi, inst.n_y))
        if (C.shape, D.shape, Q.shape) != want:
            raise ValueError(f"piece shapes {(C.shape, D.shape, Q.shape)} do not match the instance {want}")
        return self

    def to_dict(self) -> dict:
        return {"pieces": [{"C": C.tolist(), "D": D.tolist(), "Q": Q.tolist()} for C, D, Q in self.pieces]}

    @classmethod
    def from_dict(cls, d: dict) -> "PwlObjective":
        return cls(tuple((p["C"], p["D"], p["Q"]) for p in d["pieces"]))


@dataclass(frozen=True, order=True)
class PieceIndex:
    """Assignment of one piece to every candidate policy."""

    i: tuple

    def __post_init__(self):
        object.__setattr__(self, "i", tuple(int(v) for v in self.i))

    def check(self, n_pieces: int, K: int) -> "PieceIndex":
        if len(self.i) != K or any(v < 0 or v >= n_pieces for v in self.i):
            raise ValueError(f"piece index {self.i} out of range for K={K}, {n_pieces} pieces")
        return self

    def __str__(self) -> str:
        return "-".join(str(v + 1) for v in self.i)


# ---------------------------------------------------------------------------
# regret transformation


def _hindsight_terms(M: np.ndarray, bset, name: str):
    """Hindsight options for one decision block: list of matrices ``-M e_j 1^T``."""
    if not np.any(M):
        return [None]
    if not bset.is_unit_simplex():
        raise ValueError(
            f"regret transformation needs {name} = 0 or a unit-simplex feasible set for it "
            "(hindsight decisions must range over unit vectors)")
    n = M.shape[1]
    zero = set(bset.fixed_zero_indices())
    return [-np.outer(M[:, j], np.ones(n)) for j in range(n) if j not in zero]


def wcar_to_pwl(inst: DdidInstance) -> PwlObjective:
    """Worst-case absolute regret of a linear cost as a piecewise-linear objective.

    The regret of ``(x, w, y)`` in scenario ``xi`` is its cost minus the best
    cost in hindsight.  When each of the pairs (C, X), (D, W) and (Qm, Y) has
    a zero matrix or a unit-simplex set, the hindsight minimum is attained at
    a unit vector, and ``-M e_j`` can be written as ``-M e_j 1^T v`` because
    ``1^T v = 1``.  Each combination of hindsight unit vectors is one piece.
    Maximization instances are converted to costs first.
    """
    from .core import canonicalize

    can = canonicalize(inst)
    opts_c = _hindsight_terms(can.C, can.setX, "C")
    opts_d = _hindsight_terms(can.D, can.setW, "D")
    opts_q = _hindsight_terms(can.Qm, can.setY, "Qm")
    pieces = []
    for dc, dd, dq in itertools.product(opts_c, opts_d, opts_q):
        C = can.C + (0.0 if dc is None else dc)
        D = can.D + (0.0 if dd is None else dd)
        Q = can.Qm + (0.0 if dq is None else dq)
        pieces.append((C, D, Q))
    return PwlObjective(tuple(pieces))


# ---------------------------------------------------------------------------
# dual blocks shared by the monolithic model and the CCG master


def pwl_big_m(inst: DdidInstance, pwl: PwlObjective) -> float:
    biggest = max(float(np.max(np.abs(np.concatenate([a.ravel() for a in p])), initial=0.0))
                  for p in pwl.pieces)
    return max(default_big_m(inst), 10.0 * max(biggest, 1.0) * (1.0 + _range(inst)))


def _range(inst):
    from .core import max_coordinate_range

    return max_coordinate_range(inst.xi)


def _start_model(inst: DdidInstance, pwl: PwlObjective, K: int, name: str, fixed):
    m = MilpModel(name)
    x, w, y = _build.add_decisions(m, inst, K)
    if inst.h is not None:
        for k in range(K):
            _build.deterministic_rows(m, inst, x, w, y, k)
    tau = m.add_var("tau", -INF, INF)
    m.groups["tau"] = np.array([tau])
    m.set_objective({tau: 1.0})
    m.meta.update(K=K, blocks=[], big_m_vars=[])
    return m, x, w, y, tau


def _add_assignment_block(m: MilpModel, inst: DdidInstance, pwl: PwlObjective, idx: PieceIndex,
                          x, w, y, tau: int, M: float) -> dict:
    """Dual of ``max_xi min_k piece_{i_k}(xi^k, y^k)`` bounded above by ``tau``."""
    A, b = inst.xi.A, inst.xi.b
    R, N = A.shape
    K = len(idx.i)
    tag = str(idx)
    obs = np.flatnonzero(inst.xi.observable_mask)
    alpha = m.add_vars(f"alpha[{tag}]", K, 0.0, 1.0)
    beta = m.add_vars(f"beta[{tag}]", R, 0.0, INF)
    beta_k = m.add_vars(f"beta_k[{tag}]", (K, R), 0.0, INF)
    gamma = -np.ones((K, N), dtype=np.int64)
    gbar = -np.ones((K, N), dtype=np.int64)
    for k in range(K):
        for i in obs:
            gamma[k, i] = m.add_var(f"gamma[{tag}][{k},{i}]", -M, M)
            gbar[k, i] = m.product(int(w[i]), int(gamma[k, i]))
    m.add_constr(LinExpr().add_dot(alpha, np.ones(K)), "==", 1.0)
    for i in range(N):
        expr = LinExpr().add_dot(beta, A[:, i])
        for k in range(K):
            if gbar[k, i] >= 0:
                expr.add(int(gbar[k, i]), -1.0)
        m.add_constr(expr, "==", 0.0)
    for k in range(K):
        C, D, Q = pwl.pieces[idx.i[k]]
        xb = {j: m.product(int(x[j]), int(alpha[k])) for j in _build.nonzero_cols(C)}
        wb = {j: m.product(int(w[j]), int(alpha[k])) for j in _build.nonzero_cols(D)
              if inst.xi.observable_mask[j]}
        yb = {j: m.product(int(y[k, j]), int(alpha[k])) for j in _build.nonzero_cols(Q)}
        for i in range(N):
            expr = LinExpr().add_dot(beta_k[k], A[:, i])
            if gbar[k, i] >= 0:
                expr.add(int(gbar[k, i]), 1.0)
            for j, v in xb.items():
                expr.add(v, -C[i, j])
            for j, v in wb.items():
                expr.add(v, -D[i, j])
            for j, v in yb.items():
                expr.add(v, -Q[i, j])
            m.add_constr(expr, "==", 0.0)
    bound = LinExpr({tau: -1.0}).add_dot(beta, b)
    for k in range(K):
        bound.add_dot(beta_k[k], b)
    m.add_constr(bound, "<=", 0.0, name=f"tau[{tag}]")
    m.meta["big_m_vars"].extend(int(v) for v in gamma.ravel() if v >= 0)
    block = dict(index=idx, alpha=alpha, beta=beta, beta_k=beta_k, gamma=gamma)
    m.meta["blocks"].append(block)
    return block


def _all_indices(pwl: PwlObjective, K: int, cap: int) -> List[PieceIndex]:
    n = pwl.n_pieces ** K
    if n > cap:
        raise ValueError(f"{pwl.n_pieces}^{K} = {n} piece assignments exceed the cap {cap}; "
                         "use ccg_solve instead")
    return [PieceIndex(t) for t in itertools.product(range(pwl.n_pieces), repeat=K)]


def _build_master(inst, pwl, K, indices: Iterable[PieceIndex], opts, fixed, name):
    _check_pwl_instance(inst, pwl, K)
    M = opts.big_M if opts.big_M is not None else pwl_big_m(inst, pwl)
    m, x, w, y, tau = _start_model(inst, pwl, K, name, fixed)
    for idx in indices:
        _add_assignment_block(m, inst, pwl, idx.check(pwl.n_pieces, K), x, w, y, tau, M)
    m.meta["big_M"] = M
    _build.apply_fixed(m, fixed)
    m.meta["symmetry"] = _build.apply_symmetry(m, inst, K, opts, fixed)
    return m


def _check_pwl_instance(inst, pwl, K):
    if K < 1:
        raise ValueError("K must be at least 1")
    if inst.rhs_mode not in ("constant",) and inst.L > 0:
        raise ValueError("piecewise-linear objectives are supported for constant right-hand sides only")
    pwl.check(inst)


def build_pwl_monolithic(inst: DdidInstance, pwl: PwlObjective, K: int, opts: Optional[SolverOptions] = None,
                         fixed: Optional[dict] = None) -> MilpModel:
    """One dual block per piece assignment in ``I^K``; minimizes ``tau``."""
    opts = _build.options(opts)
    return _build_master(inst, pwl, K, _all_indices(pwl, K, opts.pwl_cap), opts, fixed, f"pwl_monolithic_K{K}")


def _solution_from(m, sol, value, method, K, info) -> KAdaptSolution:
    g = m.groups
    return KAdaptSolution(str(sol.status), value, x=_r(sol[g["x"]]), w=_r(sol[g["w"]]),
                          policies=_r(sol[g["y"]]), internal_value=value, method=method, K=K, info=info)


def solve_pwl_monolithic(inst: DdidInstance, pwl: PwlObjective, K: int, opts: Optional[SolverOptions] = None,
                         fixed: Optional[dict] = None) -> KAdaptSolution:
    opts = _build.options(opts)
    m = build_pwl_monolithic(inst, pwl, K, opts, fixed)
    sol = solve_milp(m, opts)
    info = dict(nodes=sol.nodes, gap=sol.gap, seconds=sol.seconds, big_M=m.meta["big_M"],
                n_indices=len(m.meta["blocks"]), symmetry=m.meta["symmetry"], n_vars=m.n_vars,
                n_rows=m.n_rows, engine=sol.engine)
    if sol.primal is None:
        return KAdaptSolution(str(sol.status), math.inf, internal_value=math.inf, method="regret-mono", K=K,
                              info=info)
    return _solution_from(m, sol, sol.value, "regret-mono", K, info)


# ---------------------------------------------------------------------------
# separation problem


def _piece_bounds(inst, pwl, x, w, y, lo, hi):
    """Lower and upper bounds of every piece over the coordinate box."""
    out = []
    for i in range(pwl.n_pieces):
        c = pwl.cost_vector(i, x, w, y)
        out.append((float(np.sum(np.where(c > 0, c * lo, c * hi))), float(np.sum(np.where(c > 0, c * hi, c * lo)))))
    return out


def build_ccg_feasibility(inst: DdidInstance, pwl: PwlObjective, x, w, policies,
                          opts: Optional[SolverOptions] = None) -> MilpModel:
    """Worst-case cost of fixed decisions as a maximization of ``theta`` (stored as ``min -theta``).

    ``eta[k]`` is the cost of policy ``k`` using the piece selected by the
    binaries ``zeta[k]``; the selected piece's row is enforced and the others
    are relaxed with a per-row bound computed from the coordinate ranges of
    the uncertainty set.  Policies breaking the deterministic constraints are
    left out; when none remains the model has no policy rows and is marked
    with ``meta["no_policy"]``.
    """
    from .kadapt_objective import feasible_policies

    policies = np.atleast_2d(np.asarray(policies, float))
    x = np.asarray(x, float)
    w = np.asarray(w, float)
    keep = feasible_policies(inst, x, w, policies)
    A, b = inst.xi.A, inst.xi.b
    N = inst.n_xi
    bounds = inst.xi.coordinate_bounds()
    lo, hi = bounds[:, 0], bounds[:, 1]
    m = MilpModel("ccg_feasibility")
    theta = m.add_var("theta", -INF, INF)
    xib = m.add_vars("xi_bar", N, lo, hi, group="xi_bar")
    for r in range(len(b)):
        m.add_constr(LinExpr().add_dot(xib, A[r]), "<=", float(b[r]))
    obs = np.flatnonzero(w > 0.5)
    xik = m.add_vars("xi", (len(keep), N), np.tile(lo, len(keep)), np.tile(hi, len(keep)), group="xi")
    zeta = m.add_vars("zeta", (len(keep), pwl.n_pieces), binary=True, group="zeta")
    eta = m.add_vars("eta", len(keep), -INF, INF, group="eta")
    for pos, k in enumerate(keep):
        for r in range(len(b)):
            m.add_constr(LinExpr().add_dot(xik[pos], A[r]), "<=", float(b[r]))
        for i in obs:
            m.add_constr({int(xik[pos, i]): 1.0, int(xib[i]): -1.0}, "==", 0.0)
        pb = _piece_bounds(inst, pwl, x, w, policies[k], lo, hi)
        top = max(u for _, u in pb)
        m.set_bounds(int(eta[pos]), -INF, top)
        m.add_constr(LinExpr().add_dot(zeta[pos], np.ones(pwl.n_pieces)), "==", 1.0)
        for i in range(pwl.n_pieces):
            big = max(top - pb[i][0], 0.0) + 1.0
            c = pwl.cost_vector(i, x, w, policies[k])
            # eta_k <= c . xi^k + big * (1 - zeta_ki)
            expr = LinExpr({int(eta[pos]): 1.0}).add_dot(xik[pos], -c).add(int(zeta[pos, i]), big)
            m.add_constr(expr, "<=", big)
        m.add_constr({theta: 1.0, int(eta[pos]): -1.0}, "<=", 0.0)
    m.set_objective({theta: -1.0})
    m.groups["theta"] = np.array([theta])
    m.meta.update(keep=keep, no_policy=not keep)
    return m


def _select_pieces(pwl, x, w, policies, keep, xi_k, tol=1e-9) -> PieceIndex:
    """Piece attaining the maximum for every policy, lowest index on ties."""
    out = []
    pos_of = {k: p for p, k in enumerate(keep)}
    for k in range(len(policies)):
        if k not in pos_of:
            out.append(0)
            continue
        vals = [float(xi_k[pos_of[k]] @ pwl.cost_vector(i, x, w, policies[k])) for i in range(pwl.n_pieces)]
        top = max(vals)
        out.append(next(i for i, v in enumerate(vals) if v >= top - tol * (1.0 + abs(top))))
    return PieceIndex(tuple(out))


def separate(inst: DdidInstance, pwl: PwlObjective, x, w, policies, opts: Optional[SolverOptions] = None):
    """Solve the separation problem: returns ``(theta, PieceIndex or None)``."""
    opts = _build.options(opts)
    policies = np.atleast_2d(np.asarray(policies, float))
    m = build_ccg_feasibility(inst, pwl, x, w, policies, opts)
    if m.meta["no_policy"]:
        return math.inf, None
    sol = solve_milp(m, opts)
    if sol.primal is None:
        raise RuntimeError(f"separation problem ended with status {sol.status}")
    theta = -sol.value
    xi_k = sol[m.groups["xi"]]
    return theta, _select_pieces(pwl, x, w, policies, m.meta["keep"], xi_k)


def evaluate_pwl_fixed(inst: DdidInstance, pwl: PwlObjective, x, w, policies,
                       opts: Optional[SolverOptions] = None) -> float:
    """Worst-case piecewise-linear cost of fixed decisions (``+inf`` if no policy is feasible)."""
    return separate(inst, pwl, x, w, policies, opts)[0]


# ---------------------------------------------------------------------------
# column-and-constraint generation


CCG_CSV_FIELDS = ("iter", "LB", "UB", "index_added", "wall_time")


@dataclass
class CcgState:
    """Progress of a column-and-constraint generation run."""

    active_indices: list = field(default_factory=list)
    LB: float = -math.inf
    UB: float = math.inf
    iterations: list = field(default_factory=list)
    status: str = "Running"

    def log(self, **row) -> None:
        self.iterations.append(row)

    def csv_rows(self) -> list:
        return [{k: r.get(k, "") for k in CCG_CSV_FIELDS} for r in self.iterations]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.DictWriter(buf, fieldnames=CCG_CSV_FIELDS, lineterminator="\n")
        wr.writeheader()
        for r in self.csv_rows():
            wr.writerow(r)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def ccg_solve(inst: DdidInstance, pwl: PwlObjective, K: int, opts: Optional[SolverOptions] = None,
              fixed: Optional[dict] = None):
    """Column-and-constraint generation over piece assignments.

    Starts from the assignment that gives every policy the first piece.  Each
    iteration solves the master over the active assignments (lower bound
    ``tau``), evaluates the master decisions exactly with the separation
    problem (``theta``, an upper bound when it improves the incumbent) and,
    unless ``theta - tau <= ccg_delta``, adds the assignment read off the
    worst case.  Returns ``(KAdaptSolution, CcgState)``; the solution is the
    best decision found and its value is that decision's exact worst case.
    """
    opts = _build.options(opts)
    _check_pwl_instance(inst, pwl, K)
    delta = opts.ccg_delta
    state = CcgState(active_indices=[PieceIndex((0,) * K)])
    t0 = time.perf_counter()
    best = None
    start = None
    masters = 0
    for it in range(1, opts.ccg_max_iter + 1):
        m = _build_master(inst, pwl, K, state.active_indices, opts, fixed, f"ccg_master_K{K}")
        sol = solve_milp(m, opts, start=start)
        masters += 1
        if sol.primal is None:
            state.status = str(sol.status)
            state.log(iter=it, LB=state.LB, UB=state.UB, tau=math.nan, theta=math.nan, index_added="",
                      wall_time=time.perf_counter() - t0)
            if str(sol.status) == "Infeasible":
                state.LB = state.UB = math.inf
            break
        g = m.groups
        x, w, y = _r(sol[g["x"]]), _r(sol[g["w"]]), _r(sol[g["y"]])
        tau = float(sol.value)
        state.LB = max(state.LB, tau)
        theta, idx = separate(inst, pwl, x, w, y, opts)
        if theta < state.UB:
            state.UB = theta
            best = (m, sol, x, w, y)
        start = {int(v): float(val) for grp in ("x", "w", "y") for v, val in zip(g[grp].ravel(), sol[g[grp]].ravel())}
        added = ""
        done = state.UB - state.LB <= delta
        if not done:
            if idx is None or idx in state.active_indices:
                state.status = "NumericalError"
                state.log(iter=it, LB=state.LB, UB=state.UB, tau=tau, theta=theta, index_added="",
                          wall_time=time.perf_counter() - t0)
                break
            state.active_indices.append(idx)
            added = str(idx)
        state.log(iter=it, LB=state.LB, UB=state.UB, tau=tau, theta=theta, index_added=added,
                  wall_time=time.perf_counter() - t0)
        if done:
            state.status = "Optimal"
            break
    else:
        state.status = "LimitReached"
    info = dict(iterations=len(state.iterations), LB=state.LB, UB=state.UB, n_indices=len(state.active_indices),
                seconds=time.perf_counter() - t0, masters=masters)
    if best is None:
        status = state.status if state.status != "Running" else "LimitReached"
        return KAdaptSolution(status, math.inf, internal_value=math.inf, method="regret-ccg", K=K, info=info), state
    m, sol, x, w, y = best
    info.update(symmetry=m.meta["symmetry"], big_M=m.meta["big_M"], engine=sol.engine)
    status = "Optimal" if state.status == "Optimal" else state.status
    return KAdaptSolution(status, state.UB, x=x, w=w, policies=y, internal_value=state.UB,
                          method="regret-ccg", K=K, info=info), state
