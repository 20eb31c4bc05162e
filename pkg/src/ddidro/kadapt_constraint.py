"""K-adaptability when the uncertainty also enters the constraints.

The right-hand side of the recourse constraints ``T x + V w + Wrec y <= H xi``
is uncertain.  Nature's lifted choice ``(xi_bar, xi^1, ..., xi^K)`` is split by
a violation index ``ell`` in ``{0, ..., L}^K``: ``ell_k = 0`` means policy ``k``
is feasible for ``xi^k`` and ``ell_k = l > 0`` means it violates row ``l`` by at
least ``eps``.  Each index gives a polyhedron.  Indices with some zero entry
(the boundary set) contribute their worst-case cost through LP duality; indices
with no zero entry must describe empty polyhedra, which is certified by a
Farkas ray.  Every product of a binary decision with a dual multiplier is
linearized exactly with bounded McCormick rows.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _build
from .core import DdidInstance, SolverOptions, canonicalize, default_big_m, default_epsilon, report_value
from .milp import INF, LinExpr, MilpModel, solve_lp, solve_milp
from ._build import rounded as _r
from .solution import KAdaptSolution


@dataclass(frozen=True)
class ConstraintViolationIndex:
    ell: tuple

    @property
    def boundary(self) -> bool:
        """True when some policy is declared feasible (``ell`` has a zero)."""
        return any(e == 0 for e in self.ell)

    @property
    def positive(self) -> bool:
        return not self.boundary

    def __iter__(self):
        return iter(self.ell)

    def __len__(self):
        return len(self.ell)


def enumerate_indices(K: int, L: int, cap: int = 10_000) -> list:
    """All violation indices in lexicographic order."""
    count = (L + 1) ** K
    if count > cap:
        raise ValueError(f"(L+1)^K = {count} violation indices exceed the cap of {cap}; "
                         "use a smaller K")
    return [ConstraintViolationIndex(tuple(e)) for e in itertools.product(range(L + 1), repeat=K)]


def _require_constraint_mode(inst: DdidInstance) -> None:
    if inst.rhs_mode != "uncertain":
        raise ValueError("constraint-uncertainty pipeline needs an uncertain right-hand side H")


def _scale(inst: DdidInstance) -> float:
    mats = [inst.C, inst.D, inst.Qm, inst.T, inst.V, inst.Wrec, inst.H]
    return max([1.0] + [float(np.max(np.abs(a))) for a in mats if a.size])


def default_constraint_big_m(inst: DdidInstance, eps: float) -> float:
    """Initial bound on the dual multipliers of the per-index blocks.

    Certificates for thin violation sets can need multipliers of order
    ``1 / eps``, but a bound of that size makes the products with binaries
    numerically loose (an integrality tolerance of 1e-9 times a bound of 1e6
    already exceeds a typical ``eps``).  The solver therefore starts from a
    data-sized bound and enlarges it whenever the exact re-evaluation shows
    that it was binding; ``eps`` is accepted for interface stability.
    """
    del eps
    return default_big_m(inst) * _scale(inst)


class _Exprs:
    """Linear expressions of the decisions, shared by every block."""

    def __init__(self, inst, x, w, y):
        self.inst, self.x, self.w, self.y = inst, x, w, y
        self._g = {}
        self._c = {}

    def g(self, k, l) -> LinExpr:
        key = (k, l)
        if key not in self._g:
            inst = self.inst
            self._g[key] = LinExpr().add_dot(self.x, inst.T[l]).add_dot(self.w, inst.V[l]).add_dot(
                self.y[k], inst.Wrec[l])
        return self._g[key]

    def cost(self, k, i) -> LinExpr:
        key = (k, i)
        if key not in self._c:
            inst = self.inst
            self._c[key] = LinExpr().add_dot(self.x, inst.C[i]).add_dot(self.w, inst.D[i]).add_dot(
                self.y[k], inst.Qm[i])
        return self._c[key]

    def H(self, k, l, i) -> LinExpr:
        """Entry ``(l, i)`` of the right-hand side matrix for policy ``k``."""
        inst = self.inst
        e = LinExpr(const=float(inst.H[l, i]))
        if inst.Hx is not None:
            e.add_dot(self.x, inst.Hx[l, i])
        if inst.Hw is not None:
            e.add_dot(self.w, inst.Hw[l, i])
        if inst.Hy is not None:
            e.add_dot(self.y[k], inst.Hy[l, i])
        return e


def _bin_times(m: MilpModel, expr: LinExpr, v: int) -> LinExpr:
    """Linearize ``expr * v`` where ``expr`` is affine in binaries and ``v`` continuous."""
    out = LinExpr()
    if expr.const:
        out.add(v, expr.const)
    for j, coef in expr.terms.items():
        out.add(m.product(j, v), coef)
    return out


def _add_block(m: MilpModel, E: _Exprs, ell: tuple, K: int, M: float, eps: float, tau: int,
               cert_rhs: float, tag: str) -> dict:
    inst = E.inst
    A, b = inst.xi.A, inst.xi.b
    R, N = A.shape
    obs = np.flatnonzero(inst.xi.observable_mask)
    boundary = any(e == 0 for e in ell)
    alpha = m.add_vars(f"alpha{tag}", R, 0.0, M)
    alpha_k = m.add_vars(f"alphak{tag}", (K, R), 0.0, M)
    eta = m.add_vars(f"eta{tag}", (K, len(obs)), -M, M)
    weta = np.array([[m.product(int(E.w[i]), int(eta[k, p])) for p, i in enumerate(obs)] for k in range(K)],
                    dtype=np.int64).reshape(K, len(obs))
    beta = {}
    gamma = {}
    lam = {}
    for k, e in enumerate(ell):
        if e == 0:
            beta[k] = m.add_vars(f"beta{tag}[{k}]", inst.L, 0.0, M)
            lam[k] = m.add_var(f"lambda{tag}[{k}]", 0.0, 1.0)
        else:
            gamma[k] = m.add_var(f"gamma{tag}[{k}]", 0.0, M)
    if boundary:
        m.add_constr(LinExpr({v: 1.0 for v in lam.values()}), "==", 1.0)

    # A^T alpha = sum_k w o eta^k
    obs_pos = {int(i): p for p, i in enumerate(obs)}
    for i in range(N):
        expr = LinExpr().add_dot(alpha, A[:, i])
        if i in obs_pos:
            for k in range(K):
                expr.add(weta[k, obs_pos[i]], -1.0)
        m.add_constr(expr, "==", 0.0)
    for k, e in enumerate(ell):
        for i in range(N):
            expr = LinExpr().add_dot(alpha_k[k], A[:, i])
            if i in obs_pos:
                expr.add(weta[k, obs_pos[i]], 1.0)
            if e == 0:
                for l in range(inst.L):
                    expr.add_expr(_bin_times(m, E.H(k, l, i), int(beta[k][l])), -1.0)
                expr.add_expr(_bin_times(m, E.cost(k, i), lam[k]), -1.0)
            else:
                expr.add_expr(_bin_times(m, E.H(k, e - 1, i), gamma[k]))
            m.add_constr(expr, "==", 0.0)

    bound = LinExpr().add_dot(alpha, b)
    for k in range(K):
        bound.add_dot(alpha_k[k], b)
    for k, e in enumerate(ell):
        if e == 0:
            for l in range(inst.L):
                bound.add_expr(_bin_times(m, E.g(k, l), int(beta[k][l])), -1.0)
        else:
            bound.add_expr(_bin_times(m, E.g(k, e - 1), gamma[k]))
            bound.add(gamma[k], -eps)
    if boundary:
        bound.add(tau, -1.0)
        m.add_constr(bound, "<=", 0.0)
    else:
        m.add_constr(bound, "<=", -cert_rhs)
    return dict(alpha=alpha, alpha_k=alpha_k, eta=eta, beta=beta, gamma=gamma, lam=lam)


def build_kadapt_constraint_mblp(inst: DdidInstance, K: int, opts: Optional[SolverOptions] = None,
                                 fixed: Optional[dict] = None) -> MilpModel:
    """Mixed-binary reformulation of the epsilon-approximate K-adaptability problem.

    The Farkas row of a positive index reads ``... <= -eps`` rather than
    ``<= -1``; both describe the same cone, and the smaller constant keeps the
    certificate inside the big-M box.
    """
    _require_constraint_mode(inst)
    if inst.sense != "minimize":
        raise ValueError("build_kadapt_constraint_mblp expects a canonicalized (minimize) instance")
    if K < 1:
        raise ValueError("K must be at least 1")
    opts = _build.options(opts)
    eps = opts.eps_feasibility if opts.eps_feasibility is not None else default_epsilon(inst)
    M = opts.big_M if opts.big_M is not None else default_constraint_big_m(inst, eps)
    indices = enumerate_indices(K, inst.L, opts.index_cap)

    m = MilpModel(f"kadapt_constraint_K{K}")
    x, w, y = _build.add_decisions(m, inst, K)
    tau = m.add_var("tau", -INF, INF)
    m.groups["tau"] = np.array([tau])
    E = _Exprs(inst, x, w, y)
    blocks = []
    for n, idx in enumerate(indices):
        tag = "[" + ",".join(map(str, idx.ell)) + "]"
        blocks.append(_add_block(m, E, idx.ell, K, M, eps, tau, eps, tag))
    m.set_objective({tau: 1.0})
    m.meta.update(K=K, big_M=M, eps=eps, indices=[i.ell for i in indices], blocks=blocks)
    _build.apply_fixed(m, fixed)
    m.meta["symmetry"] = _build.apply_symmetry(m, inst, K, opts, fixed)
    return m


class _ExoExprs(_Exprs):
    """Expressions with every coordinate observed (``w`` fixed to ones, ``V = 0``)."""

    def __init__(self, inst, x, y):
        super().__init__(inst, x, None, y)

    def g(self, k, l) -> LinExpr:
        return LinExpr().add_dot(self.x, self.inst.T[l]).add_dot(self.y[k], self.inst.Wrec[l])

    def cost(self, k, i) -> LinExpr:
        return LinExpr().add_dot(self.x, self.inst.C[i]).add_dot(self.y[k], self.inst.Qm[i])

    def H(self, k, l, i) -> LinExpr:
        inst = self.inst
        e = LinExpr(const=float(inst.H[l, i]))
        if inst.Hw is not None:
            e.const += float(inst.Hw[l, i].sum())
        if inst.Hx is not None:
            e.add_dot(self.x, inst.Hx[l, i])
        if inst.Hy is not None:
            e.add_dot(self.y[k], inst.Hy[l, i])
        return e


def build_exogenous_constraint_mblp(inst: DdidInstance, K: int, opts: Optional[SolverOptions] = None) -> MilpModel:
    """Reduced model when all uncertain coordinates are observed.

    With ``w = 1`` every policy faces the same realization, so each index
    block needs one multiplier vector for the uncertainty set instead of
    ``K + 1`` copies linked by non-anticipativity multipliers.  Only valid
    when ``D = 0`` and ``V = 0``.
    """
    _require_constraint_mode(inst)
    if inst.sense != "minimize":
        raise ValueError("build_exogenous_constraint_mblp expects a canonicalized (minimize) instance")
    if np.any(inst.D != 0) or np.any(inst.V != 0):
        raise ValueError("exogenous reduction requires D = 0 and V = 0")
    opts = _build.options(opts)
    eps = opts.eps_feasibility if opts.eps_feasibility is not None else default_epsilon(inst)
    M = opts.big_M if opts.big_M is not None else default_constraint_big_m(inst, eps)
    A, b = inst.xi.A, inst.xi.b
    R, N = A.shape
    m = MilpModel(f"exogenous_constraint_K{K}")
    x = m.add_vars("x", inst.n_x, binary=True, group="x")
    y = m.add_vars("y", (K, inst.n_y), binary=True, group="y")
    _build.add_set_rows(m, x, inst.setX, "X")
    for k in range(K):
        _build.add_set_rows(m, y[k], inst.setY, f"Y{k}")
    tau = m.add_var("tau", -INF, INF)
    E = _ExoExprs(inst, x, y)
    indices = enumerate_indices(K, inst.L, opts.index_cap)
    for idx in indices:
        ell = idx.ell
        tag = "[" + ",".join(map(str, ell)) + "]"
        alpha = m.add_vars(f"alpha{tag}", R, 0.0, M)
        beta, gamma, lam = {}, {}, {}
        for k, e in enumerate(ell):
            if e == 0:
                beta[k] = m.add_vars(f"beta{tag}[{k}]", inst.L, 0.0, M)
                lam[k] = m.add_var(f"lambda{tag}[{k}]", 0.0, 1.0)
            else:
                gamma[k] = m.add_var(f"gamma{tag}[{k}]", 0.0, M)
        if lam:
            m.add_constr(LinExpr({v: 1.0 for v in lam.values()}), "==", 1.0)
        for i in range(N):
            expr = LinExpr().add_dot(alpha, A[:, i])
            for k, e in enumerate(ell):
                if e == 0:
                    for l in range(inst.L):
                        expr.add_expr(_bin_times(m, E.H(k, l, i), int(beta[k][l])), -1.0)
                    expr.add_expr(_bin_times(m, E.cost(k, i), lam[k]), -1.0)
                else:
                    expr.add_expr(_bin_times(m, E.H(k, e - 1, i), gamma[k]))
            m.add_constr(expr, "==", 0.0)
        bound = LinExpr().add_dot(alpha, b)
        for k, e in enumerate(ell):
            if e == 0:
                for l in range(inst.L):
                    bound.add_expr(_bin_times(m, E.g(k, l), int(beta[k][l])), -1.0)
            else:
                bound.add_expr(_bin_times(m, E.g(k, e - 1), gamma[k]))
                bound.add(gamma[k], -eps)
        if lam:
            bound.add(tau, -1.0)
            m.add_constr(bound, "<=", 0.0)
        else:
            m.add_constr(bound, "<=", -eps)
    m.set_objective({tau: 1.0})
    m.meta.update(K=K, big_M=M, eps=eps, indices=[i.ell for i in indices], symmetry="none")
    return m


def solve_exogenous_constraint(inst: DdidInstance, K: int, opts: Optional[SolverOptions] = None) -> KAdaptSolution:
    """Solve the reduced exogenous model with the same exact verification as the full model."""
    src = inst
    inst = canonicalize(inst)
    return _solve_verified(src, inst, K, _build.options(opts),
                           lambda i, k, o, fixed: build_exogenous_constraint_mblp(i, k, o), None, None,
                           "exogenous-constraint")


def _no_good(m: MilpModel, decisions: dict) -> None:
    """Cut off one assignment of the binary decisions."""
    e = LinExpr()
    rhs = 1.0
    for g in ("x", "w", "y"):
        if g not in m.groups:
            continue
        for vid, val in zip(m.groups[g].reshape(-1), np.asarray(decisions[g]).reshape(-1)):
            if val > 0.5:
                e.add(int(vid), -1.0)
                rhs -= 1.0
            else:
                e.add(int(vid), 1.0)
    m.add_constr(e, ">=", rhs)


MAX_NO_GOOD_CUTS = 50


def solve_kadapt_constraint(inst: DdidInstance, K: int, opts: Optional[SolverOptions] = None,
                            fixed: Optional[dict] = None, start=None) -> KAdaptSolution:
    """Solve the epsilon-approximate K-adaptability problem.

    The reported value is a lower bound on the K-adaptability value that
    becomes tight as ``eps`` goes to 0.

    Every MILP incumbent is re-evaluated exactly, one primal LP per violation
    index.  When the exact value is below the MILP value the big-M bound cut
    off useful multipliers, so the model is rebuilt with ``10 * M``.  When it
    is above, the MILP accepted a certificate that only holds within solver
    tolerances (large ``M`` against a small ``eps``); that assignment is
    excluded by a no-good cut and the MILP is solved again.  An infeasible
    verdict is confirmed once with a 100 times larger bound.
    """
    src = inst
    inst = canonicalize(inst)
    _require_constraint_mode(inst)
    return _solve_verified(src, inst, K, _build.options(opts), build_kadapt_constraint_mblp, fixed, start,
                           "constraint")


def _decisions(m: MilpModel, sol, inst: DdidInstance) -> dict:
    d = {g: _r(sol[m.groups[g]]) for g in ("x", "w", "y") if g in m.groups}
    d.setdefault("x", np.zeros(inst.n_x))
    d.setdefault("w", np.ones(inst.n_xi))
    return d


def _solve_verified(src, inst, K, opts, builder, fixed, start, method) -> KAdaptSolution:
    eps = opts.eps_feasibility if opts.eps_feasibility is not None else default_epsilon(inst)
    user_M = opts.big_M is not None
    M = opts.big_M if user_M else default_constraint_big_m(inst, eps)
    retries = 0
    sensitive = False
    cuts: list = []
    best = None  # (exact value, decisions)
    nodes, seconds = 0, 0.0
    while True:
        o = opts.replace(big_M=M, eps_feasibility=eps)
        m = builder(inst, K, o, fixed)
        for d in cuts:
            _no_good(m, d)
        sol = solve_milp(m, o, start=None if cuts else start)
        nodes += sol.nodes or 0
        seconds += sol.seconds or 0.0
        if sol.primal is None:
            if sol.status == "Infeasible" and not user_M and retries == 0 and not cuts:
                M *= 100.0
                retries += 1
                continue
            break
        decisions = _decisions(m, sol, inst)
        exact = max(index_values(inst, decisions["x"], decisions["w"], decisions["y"], eps, o).values())
        tol = 1e-6 * (1.0 + abs(sol.value))
        if exact < math.inf and (best is None or exact < best[0]):
            best = (exact, decisions)
        if exact > sol.value + tol:
            if len(cuts) >= MAX_NO_GOOD_CUTS:
                break
            cuts.append(decisions)
            continue
        sensitive = exact < sol.value - tol
        if not sensitive or user_M or retries >= opts.max_big_m_retries:
            break
        M *= 10.0
        retries += 1
    info = dict(nodes=nodes, gap=sol.gap, seconds=seconds, big_M=M, eps=eps, big_m_retries=retries,
                big_m_binding=bool(sensitive), no_good_cuts=len(cuts), symmetry=m.meta.get("symmetry"),
                n_vars=m.n_vars, n_rows=m.n_rows, n_indices=len(m.meta["indices"]), engine=sol.engine)
    if sol.primal is None:
        status = str(sol.status)
        if status == "Infeasible" and best is not None:
            status = "Optimal"  # every remaining assignment was cut off
    elif best is None or best[0] > sol.value + 1e-6 * (1.0 + abs(sol.value)):
        status = "LimitReached"  # the cut budget ran out before verification
    else:
        status = str(sol.status)
    if best is None:
        return KAdaptSolution(status, report_value(src, math.inf), internal_value=math.inf,
                              method=method, K=K, info=info)
    value, d = best
    return KAdaptSolution(status, report_value(src, value) + 0.0, x=d["x"], w=d["w"], policies=d["y"],
                          internal_value=value, method=method, K=K, info=info)


# ---------------------------------------------------------------------------
# evaluation of fixed decisions, one primal LP per violation index


def _index_lp(inst: DdidInstance, x, w, policies, ell, eps):
    """Primal LP of one violation index (canonical instance)."""
    A, b = inst.xi.A, inst.xi.b
    N = inst.n_xi
    K = len(policies)
    m = MilpModel("index_lp")
    tau = m.add_var("tau", -INF, INF)
    xib = m.add_vars("xi_bar", N, -INF, INF)
    xik = m.add_vars("xi", (K, N), -INF, INF)
    for r in range(len(b)):
        m.add_constr(LinExpr().add_dot(xib, A[r]), "<=", float(b[r]))
    obs = np.flatnonzero(np.asarray(w) > 0.5)
    boundary = any(e == 0 for e in ell)
    for k, e in enumerate(ell):
        y = policies[k]
        Hk = inst.rhs_matrix(x, w, y)
        g = inst.lhs(x, w, y)
        for r in range(len(b)):
            m.add_constr(LinExpr().add_dot(xik[k], A[r]), "<=", float(b[r]))
        for i in obs:
            m.add_constr({int(xik[k, i]): 1.0, int(xib[i]): -1.0}, "==", 0.0)
        if e == 0:
            for l in range(inst.L):
                m.add_constr(LinExpr().add_dot(xik[k], Hk[l]), ">=", float(g[l]))
            m.add_constr(LinExpr({tau: 1.0}).add_dot(xik[k], -inst.cost_vector(x, w, y)), "<=", 0.0)
        else:
            m.add_constr(LinExpr().add_dot(xik[k], Hk[e - 1]), "<=", float(g[e - 1]) - eps)
    if boundary:
        m.set_objective({tau: -1.0})
    else:
        m.fix(tau, 0.0)
    return m


def index_values(inst: DdidInstance, x, w, policies, eps: Optional[float] = None, opts=None,
                 engine: Optional[str] = None) -> dict:
    """Per-index values of fixed decisions on a canonical instance.

    Boundary indices map to the worst-case cost over their polyhedron
    (``-inf`` when it is empty); positive indices map to ``+inf`` when their
    polyhedron is non-empty and ``-inf`` otherwise.
    """
    opts = _build.options(opts)
    eps = eps if eps is not None else (opts.eps_feasibility or default_epsilon(inst))
    policies = np.atleast_2d(np.asarray(policies, float))
    K = policies.shape[0]
    out = {}
    for idx in enumerate_indices(K, inst.L, opts.index_cap):
        m = _index_lp(inst, x, w, policies, idx.ell, eps)
        sol = solve_lp(m, opts, engine)
        if sol.status == "Infeasible":
            out[idx.ell] = -math.inf
        elif sol.status != "Optimal":
            raise RuntimeError(f"index LP {idx.ell} ended with status {sol.status}")
        elif idx.boundary:
            out[idx.ell] = -sol.value
        else:
            out[idx.ell] = math.inf
    return out


def evaluate_constraint_fixed(inst: DdidInstance, x, w, policies, eps: Optional[float] = None,
                              opts: Optional[SolverOptions] = None, engine: Optional[str] = None) -> float:
    """Approximate K-adaptability objective of fixed decisions, in the instance's sense.

    Returns an infinite value when some positive index describes a non-empty
    polyhedron, i.e. nature can make every policy infeasible.
    """
    _require_constraint_mode(inst)
    can = canonicalize(inst)
    vals = index_values(can, x, w, policies, eps, opts, engine)
    return report_value(inst, max(vals.values()))


def robustly_feasible_in_slice(inst: DdidInstance, x, w, y, fixed_coords: dict, opts=None, tol=1e-7) -> bool:
    """Whether ``y`` satisfies every constraint for all ``xi`` in the slice."""
    opts = _build.options(opts)
    Hm = inst.rhs_matrix(x, w, y)
    g = inst.lhs(x, w, y)
    for l in range(inst.L):
        m = MilpModel("slice_row")
        xi = m.add_vars("xi", inst.n_xi, -INF, INF)
        for r in range(inst.xi.n_rows):
            m.add_constr(LinExpr().add_dot(xi, inst.xi.A[r]), "<=", float(inst.xi.b[r]))
        for i, v in fixed_coords.items():
            m.add_constr({int(xi[i]): 1.0}, "==", float(v))
        m.set_objective(LinExpr().add_dot(xi, Hm[l]))
        res = solve_lp(m, opts)
        if res.status != "Optimal":
            raise ValueError("observation is inconsistent with the uncertainty set")
        if res.value < g[l] - tol:
            return False
    return True


def positive_certificate_exists(inst: DdidInstance, x, w, policies, eps, opts=None) -> bool:
    """True when every positive index polyhedron is empty (no index makes all policies fail)."""
    can = canonicalize(inst)
    vals = index_values(can, x, w, policies, eps, opts)
    return all(v == -math.inf for ell, v in vals.items() if all(e > 0 for e in ell))
