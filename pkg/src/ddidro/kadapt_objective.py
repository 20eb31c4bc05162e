"""K-adaptability for problems whose uncertainty sits in the objective only.

For fixed decisions the worst-case cost is the LP

    max  tau
    s.t. tau <= (C x + D w + Qm y^k) . xi^k      for every k
         A xi_bar <= b,  A xi^k <= b,  w o xi^k = w o xi_bar.

Dualizing it and letting ``(x, w, y)`` vary gives a bilinear program whose
products (a binary times a continuous dual) are linearized exactly, which
yields a mixed-binary linear program.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from . import _build
from .core import DdidInstance, SolverOptions, canonicalize, default_big_m, report_value
from .milp import INF, LinExpr, MilpModel, solve_lp, solve_milp
from ._build import rounded as _r
from .solution import DualBlock, KAdaptSolution


def _require_objective_mode(inst: DdidInstance) -> None:
    if inst.rhs_mode != "constant":
        raise ValueError("objective-uncertainty pipeline needs a constant right-hand side h; "
                         "use solve_kadapt_constraint for instances with uncertain H")


def build_kadapt_objective_mblp(inst: DdidInstance, K: int, opts: Optional[SolverOptions] = None,
                                fixed: Optional[dict] = None) -> MilpModel:
    """Mixed-binary reformulation of the K-adaptability problem.

    ``inst`` must be in minimization form (see :func:`canonicalize`).  The
    returned model exposes groups ``x``, ``w``, ``y``, ``alpha``, ``beta``,
    ``beta_k``, ``gamma`` and the linearization groups ``gamma_bar``,
    ``x_bar``, ``w_bar`` and ``y_bar`` (entries ``-1`` mark products that were
    not needed because the matching matrix column is zero).
    """
    _require_objective_mode(inst)
    if inst.sense != "minimize":
        raise ValueError("build_kadapt_objective_mblp expects a canonicalized (minimize) instance")
    if K < 1:
        raise ValueError("K must be at least 1")
    opts = _build.options(opts)
    M = opts.big_M if opts.big_M is not None else default_big_m(inst)
    A, b = inst.xi.A, inst.xi.b
    R, N = A.shape

    m = MilpModel(f"kadapt_objective_K{K}")
    x, w, y = _build.add_decisions(m, inst, K)
    alpha = m.add_vars("alpha", K, 0.0, 1.0, group="alpha")
    beta = m.add_vars("beta", R, 0.0, INF, group="beta")
    beta_k = m.add_vars("beta_k", (K, R), 0.0, INF, group="beta_k")
    gamma = m.add_vars("gamma", (K, N), -M, M, group="gamma")
    observable = inst.xi.observable_mask

    m.add_constr(LinExpr().add_dot(alpha, np.ones(K)), "==", 1.0, name="simplex")
    gbar = -np.ones((K, N), dtype=np.int64)
    for k in range(K):
        for i in np.flatnonzero(observable):
            gbar[k, i] = m.product(int(w[i]), int(gamma[k, i]))
    xcols = _build.nonzero_cols(inst.C)
    wcols = _build.nonzero_cols(inst.D)
    ycols = _build.nonzero_cols(inst.Qm)
    xbar = -np.ones((K, inst.n_x), dtype=np.int64)
    wbar = -np.ones((K, N), dtype=np.int64)
    ybar = -np.ones((K, inst.n_y), dtype=np.int64)
    for k in range(K):
        for j in xcols:
            xbar[k, j] = m.product(int(x[j]), int(alpha[k]))
        for j in wcols:
            if observable[j]:
                wbar[k, j] = m.product(int(w[j]), int(alpha[k]))
        for j in ycols:
            ybar[k, j] = m.product(int(y[k, j]), int(alpha[k]))
    m.groups.update(gamma_bar=gbar, x_bar=xbar, w_bar=wbar, y_bar=ybar)

    # A^T beta = sum_k w o gamma^k
    for i in range(N):
        expr = LinExpr().add_dot(beta, A[:, i])
        for k in range(K):
            if gbar[k, i] >= 0:
                expr.add(gbar[k, i], -1.0)
        m.add_constr(expr, "==", 0.0, name=f"dual_nominal[{i}]")
    # A^T beta^k + w o gamma^k = C x_bar^k + D w_bar^k + Qm y_bar^k
    for k in range(K):
        for i in range(N):
            expr = LinExpr().add_dot(beta_k[k], A[:, i])
            if gbar[k, i] >= 0:
                expr.add(gbar[k, i], 1.0)
            for j in xcols:
                expr.add(xbar[k, j], -inst.C[i, j])
            for j in wcols:
                if wbar[k, j] >= 0:
                    expr.add(wbar[k, j], -inst.D[i, j])
            for j in ycols:
                expr.add(ybar[k, j], -inst.Qm[i, j])
            m.add_constr(expr, "==", 0.0, name=f"dual_policy[{k},{i}]")
        _build.deterministic_rows(m, inst, x, w, y, k)

    obj = LinExpr().add_dot(beta, b)
    for k in range(K):
        obj.add_dot(beta_k[k], b)
    m.set_objective(obj)
    m.meta.update(K=K, big_M=M, big_m_vars=gamma.reshape(-1).tolist())
    _build.apply_fixed(m, fixed)
    m.meta["symmetry"] = _build.apply_symmetry(m, inst, K, opts, fixed)
    return m


def build_exogenous_objective_mblp(inst: DdidInstance, K: int, opts: Optional[SolverOptions] = None) -> MilpModel:
    """Reduced model for the case where every coordinate is observed.

    Only valid when ``D = 0`` and ``V = 0``; then the worst case is
    ``max_xi min_k xi . (C x + Qm y^k)`` and its dual needs a single ``beta``.
    """
    _require_objective_mode(inst)
    if np.any(inst.D != 0) or np.any(inst.V != 0):
        raise ValueError("exogenous reduction requires D = 0 and V = 0")
    opts = _build.options(opts)
    A, b = inst.xi.A, inst.xi.b
    R, N = A.shape
    m = MilpModel(f"exogenous_objective_K{K}")
    x = m.add_vars("x", inst.n_x, binary=True, group="x")
    y = m.add_vars("y", (K, inst.n_y), binary=True, group="y")
    _build.add_set_rows(m, x, inst.setX)
    for k in range(K):
        _build.add_set_rows(m, y[k], inst.setY)
    lam = m.add_vars("alpha", K, 0.0, 1.0, group="alpha")
    beta = m.add_vars("beta", R, 0.0, INF, group="beta")
    m.add_constr(LinExpr().add_dot(lam, np.ones(K)), "==", 1.0)
    for i in range(N):
        expr = LinExpr().add_dot(beta, A[:, i]).add_dot(x, -inst.C[i])
        for k in range(K):
            for j in np.flatnonzero(inst.Qm[i]):
                expr.add(m.product(int(y[k, j]), int(lam[k])), -inst.Qm[i, j])
        m.add_constr(expr, "==", 0.0)
    for k in range(K):
        for l in range(inst.L):
            m.add_constr(LinExpr().add_dot(x, inst.T[l]).add_dot(y[k], inst.Wrec[l]), "<=", float(inst.h[l]))
    m.set_objective(LinExpr().add_dot(beta, b))
    if _build.symmetry_enabled(opts, K):
        from .speedups import add_symmetry_breaking

        add_symmetry_breaking(m, y)
    return m


def solve_exogenous_objective(inst: DdidInstance, K: int, opts: Optional[SolverOptions] = None) -> KAdaptSolution:
    src = inst
    inst = canonicalize(inst)
    opts = _build.options(opts)
    m = build_exogenous_objective_mblp(inst, K, opts)
    sol = solve_milp(m, opts)
    if sol.primal is None:
        return KAdaptSolution(str(sol.status), report_value(src, math.inf), internal_value=math.inf,
                              method="exogenous", K=K)
    return KAdaptSolution(str(sol.status), report_value(src, sol.value), _r(sol[m.groups["x"]]),
                          np.ones(inst.n_xi), _r(sol[m.groups["y"]]), internal_value=sol.value,
                          method="exogenous", K=K)


def extract_dual_block(m: MilpModel, primal) -> DualBlock:
    g = m.groups
    return DualBlock(primal[g["alpha"]], primal[g["beta"]], primal[g["beta_k"]], primal[g["gamma"]])


def solve_kadapt_objective(inst: DdidInstance, K: int, opts: Optional[SolverOptions] = None,
                           fixed: Optional[dict] = None, start=None) -> KAdaptSolution:
    """Solve the K-adaptability problem for objective uncertainty.

    The big-M bound is checked after the solve; if a bounded dual sits at the
    bound the model is rebuilt with a ten times larger bound (at most
    ``opts.max_big_m_retries`` times).
    """
    from .validation import binding_big_m

    src = inst
    inst = canonicalize(inst)
    _require_objective_mode(inst)
    opts = _build.options(opts)
    M = opts.big_M if opts.big_M is not None else default_big_m(inst)
    retries = 0
    while True:
        m = build_kadapt_objective_mblp(inst, K, opts.replace(big_M=M), fixed)
        sol = solve_milp(m, opts)
        binding = binding_big_m(m, sol.primal, opts.lp_feas_tol) if sol.primal is not None else []
        if binding:
            # a multiplier at the bound is harmless when the exact evaluation agrees
            g = m.groups
            exact = evaluate_policies_canonical(inst, _r(sol[g["x"]]), _r(sol[g["w"]]), _r(sol[g["y"]]), opts)
            if abs(exact - sol.value) <= 1e-6 * (1.0 + abs(exact)):
                binding = []
        if not binding or retries >= opts.max_big_m_retries or opts.big_M is not None:
            break
        M *= 10.0
        retries += 1
    info = dict(nodes=sol.nodes, gap=sol.gap, seconds=sol.seconds, big_M=M, big_m_retries=retries,
                big_m_binding=len(binding), symmetry=m.meta.get("symmetry"), n_vars=m.n_vars,
                n_rows=m.n_rows, engine=sol.engine)
    if sol.primal is None:
        return KAdaptSolution(str(sol.status), report_value(src, math.inf), internal_value=math.inf,
                              method="objective", K=K, info=info)
    g = m.groups
    return KAdaptSolution(
        str(sol.status), report_value(src, sol.value),
        x=_r(sol[g["x"]]), w=_r(sol[g["w"]]), policies=_r(sol[g["y"]]),
        duals=extract_dual_block(m, sol.primal), internal_value=sol.value, method="objective", K=K,
        info=info,
    )


# ---------------------------------------------------------------------------
# evaluation of fixed decisions


def _policy_costs(inst: DdidInstance, x, w, policies) -> np.ndarray:
    return np.array([inst.cost_vector(x, w, y) for y in policies]).reshape(len(policies), inst.n_xi)


def feasible_policies(inst: DdidInstance, x, w, policies, tol: float = 1e-9) -> list:
    """Indices of policies meeting ``T x + V w + Wrec y <= h``."""
    if inst.h is None:
        return list(range(len(policies)))
    return [k for k, y in enumerate(policies) if np.all(inst.lhs(x, w, y) <= inst.h + tol)]


def build_evaluation_lp(inst: DdidInstance, x, w, policies) -> MilpModel:
    """Worst-case cost LP of fixed decisions in minimization form (``min -tau``).

    ``inst`` must be canonical.  Only the supplied policies are used.
    """
    A, b = inst.xi.A, inst.xi.b
    N = inst.n_xi
    costs = _policy_costs(inst, x, w, policies)
    K = len(policies)
    m = MilpModel("evaluate_policies")
    tau = m.add_var("tau", -INF, INF)
    xib = m.add_vars("xi_bar", N, -INF, INF, group="xi_bar")
    xik = m.add_vars("xi", (K, N), -INF, INF, group="xi")
    rows = {"tau": [], "nominal": [], "policy": [], "link": []}
    for k in range(K):
        rows["tau"].append(m.add_constr(LinExpr({tau: 1.0}).add_dot(xik[k], -costs[k]), "<=", 0.0))
    rows["nominal"] = [m.add_constr(LinExpr().add_dot(xib, A[r]), "<=", float(b[r])) for r in range(len(b))]
    for k in range(K):
        rows["policy"].append([m.add_constr(LinExpr().add_dot(xik[k], A[r]), "<=", float(b[r]))
                               for r in range(len(b))])
    obs = np.flatnonzero(np.asarray(w) > 0.5)
    for k in range(K):
        rows["link"].append([(i, m.add_constr({int(xik[k, i]): 1.0, int(xib[i]): -1.0}, "==", 0.0))
                             for i in obs])
    m.set_objective({tau: -1.0})
    m.groups["tau"] = np.array([tau])
    m.meta["rows"] = rows
    return m


def evaluate_policies_canonical(inst: DdidInstance, x, w, policies, opts=None, engine=None,
                                with_duals: bool = False):
    """Worst-case cost of the decision tuple for a canonical instance."""
    opts = _build.options(opts)
    policies = np.atleast_2d(np.asarray(policies, float))
    keep = feasible_policies(inst, x, w, policies)
    if not keep:
        return (math.inf, None) if with_duals else math.inf
    pols = policies[keep]
    m = build_evaluation_lp(inst, x, w, pols)
    sol = solve_lp(m, opts, engine)
    if sol.status != "Optimal":
        raise RuntimeError(f"evaluation LP ended with status {sol.status}")
    value = -sol.value
    if not with_duals:
        return value
    block = None
    if sol.duals is not None:
        y = sol.duals
        rows = m.meta["rows"]
        K, N = len(pols), inst.n_xi
        alpha = np.zeros(len(policies))
        alpha[keep] = -y[rows["tau"]]
        beta = -y[rows["nominal"]]
        beta_k = np.zeros((len(policies), len(inst.xi.b)))
        gamma = np.zeros((len(policies), N))
        for pos, k in enumerate(keep):
            beta_k[k] = -y[rows["policy"][pos]]
            for i, r in rows["link"][pos]:
                gamma[k, i] = -y[r]
        block = DualBlock(alpha, beta, beta_k, gamma)
    return value, block


def evaluate_policies_lp(inst: DdidInstance, x, w, policies: Sequence, opts: Optional[SolverOptions] = None,
                         engine: Optional[str] = None) -> float:
    """Exact worst-case cost of ``(x, w, policies)`` in the instance's own sense.

    Policies breaking the deterministic constraints are ignored; when none is
    left the decision is infeasible and the value is infinite (``+inf`` for
    minimization, ``-inf`` for maximization).
    """
    _require_objective_mode(inst)
    value = evaluate_policies_canonical(canonicalize(inst), x, w, policies, opts, engine)
    return report_value(inst, value)


def select_recourse_policy(inst: DdidInstance, sol: KAdaptSolution, observed, opts=None, tol: float = 1e-7) -> int:
    """Index of the policy to implement once the observed coordinates are known.

    ``observed`` maps coordinate index to value, or is a full-length vector
    whose entries at ``w_i = 0`` are ignored.  For every policy the worst-case
    cost over the consistent slice of the uncertainty set is computed by LP
    and the best one is returned, ties going to the lowest index.  With an
    uncertain right-hand side only policies that stay feasible on the whole
    slice take part.
    """
    opts = _build.options(opts)
    can = canonicalize(inst)
    w = np.asarray(sol.w, float)
    obs_idx = np.flatnonzero(w > 0.5)
    if isinstance(observed, dict):
        vals = {int(i): float(v) for i, v in observed.items()}
    else:
        arr = np.asarray(observed, float).reshape(-1)
        vals = {int(i): float(arr[i]) for i in obs_idx} if arr.shape[0] == inst.n_xi else dict(
            zip(obs_idx.tolist(), arr.tolist()))
    missing = [int(i) for i in obs_idx if int(i) not in vals]
    if missing:
        raise ValueError(f"observation missing for coordinates {missing}")
    policies = np.atleast_2d(sol.policies)
    if can.rhs_mode == "uncertain":
        from .kadapt_constraint import robustly_feasible_in_slice

        keep = [k for k, y in enumerate(policies) if robustly_feasible_in_slice(can, sol.x, w, y, vals, opts)]
    elif can.h is not None:
        keep = feasible_policies(can, sol.x, w, policies)
    else:
        keep = list(range(len(policies)))
    best_k, best_v = None, math.inf
    costs = _policy_costs(can, sol.x, w, policies)
    for k in range(len(policies)):
        m = MilpModel("slice")
        xi = m.add_vars("xi", can.n_xi, -INF, INF)
        for r in range(can.xi.n_rows):
            m.add_constr(LinExpr().add_dot(xi, can.xi.A[r]), "<=", float(can.xi.b[r]))
        for i in obs_idx:
            m.add_constr({int(xi[i]): 1.0}, "==", vals[int(i)])
        m.set_objective(LinExpr().add_dot(xi, -costs[k]))
        res = solve_lp(m, opts)
        if res.status == "Infeasible":
            raise ValueError("observation is inconsistent with the uncertainty set")
        if k not in keep:
            continue
        v = -res.value
        if v < best_v - tol:
            best_k, best_v = k, v
    if best_k is None:
        raise ValueError("no policy is feasible for every scenario consistent with the observation")
    return best_k
