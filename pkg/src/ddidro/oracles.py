"""Brute-force reference evaluators.

Everything here enumerates decisions explicitly and evaluates them with
small LPs solved by the in-house dense simplex, so the results do not depend
on the reformulations or on HiGHS.  They are only meant for small instances.
"""
from __future__ import annotations

import itertools
import math
import warnings
from typing import Optional

import numpy as np

from .core import BinaryFeasibleSet, DdidInstance, SolverOptions, canonicalize, report_value
from .milp import INF, LinExpr, MilpModel, solve_lp

ORACLE_ENGINE = "simplex"


def enumerate_members(bset: BinaryFeasibleSet, cap: int = 2 ** 16) -> list:
    """All members of ``bset`` in lexicographic order.

    Coordinates fixed to zero by a single-variable row are skipped during the
    enumeration, so only the free part counts against ``cap``.
    """
    zeros = set(bset.fixed_zero_indices())
    free = [i for i in range(bset.dim) if i not in zeros]
    if 2 ** len(free) > cap:
        raise ValueError(f"enumerating 2^{len(free)} vectors exceeds the oracle cap {cap}")
    out = []
    for bits in itertools.product((0, 1), repeat=len(free)):
        v = np.zeros(bset.dim)
        v[free] = bits
        if bset.contains(v):
            out.append(v)
    if not out:
        warnings.warn("binary feasible set is empty", RuntimeWarning, stacklevel=2)
    return out


def _opts(opts):
    return opts if opts is not None else SolverOptions()


def _eval(inst, x, w, policies, opts):
    from .kadapt_objective import evaluate_policies_canonical

    return evaluate_policies_canonical(inst, x, w, policies, opts, ORACLE_ENGINE)


def _policy_subsets(pols: list, K: int):
    if len(pols) == 0:
        return
    if K >= len(pols):
        yield pols
        return
    yield from (list(c) for c in itertools.combinations(pols, K))


def _check_cap(n: int, cap: int, what: str):
    if n > cap:
        raise ValueError(f"{what}: {n} candidates exceed the oracle cap {cap}")


def brute_force_kadapt_objective(inst: DdidInstance, K: int, opts: Optional[SolverOptions] = None,
                                 w_fixed=None):
    """Exact K-adaptability value by enumeration (objective uncertainty).

    Returns ``(value, (x, w, policies))`` with the value in the instance's
    sense.  Policies are enumerated as unordered subsets of the policies that
    satisfy the deterministic constraints for the given ``(x, w)``.
    """
    opts = _opts(opts)
    can = canonicalize(inst)
    X = enumerate_members(can.setX, opts.oracle_cap)
    W = enumerate_members(can.setW, opts.oracle_cap) if w_fixed is None else [np.asarray(w_fixed, float)]
    Y = enumerate_members(can.setY, opts.oracle_cap)
    n_sub = math.comb(len(Y), K) if K < len(Y) else 1
    _check_cap(len(X) * len(W) * n_sub, opts.oracle_cap, "brute_force_kadapt_objective")
    best, arg = math.inf, None
    for x in X:
        for w in W:
            feas = [y for y in Y if np.all(can.lhs(x, w, y) <= can.h + 1e-9)]
            for sub in _policy_subsets(feas, K):
                v = _eval(can, x, w, np.array(sub), opts)
                if v < best - 1e-12:
                    best, arg = v, (x, w, np.array(sub))
    return report_value(inst, best), arg


def exact_two_stage_objective(inst: DdidInstance, w_fixed=None, opts: Optional[SolverOptions] = None,
                              x_fixed=None) -> float:
    """Fully adaptive two-stage value, obtained with every member of Y as a policy."""
    opts = _opts(opts)
    can = canonicalize(inst)
    X = enumerate_members(can.setX, opts.oracle_cap) if x_fixed is None else [np.asarray(x_fixed, float)]
    W = enumerate_members(can.setW, opts.oracle_cap) if w_fixed is None else [np.asarray(w_fixed, float)]
    Y = enumerate_members(can.setY, opts.oracle_cap)
    best = math.inf
    for x in X:
        for w in W:
            feas = [y for y in Y if np.all(can.lhs(x, w, y) <= can.h + 1e-9)]
            if feas:
                best = min(best, _eval(can, x, w, np.array(feas), opts))
    return report_value(inst, best)


def verify_duality_block(inst: DdidInstance, x, w, policies, block=None, tol: float = 1e-6,
                         opts: Optional[SolverOptions] = None) -> bool:
    """Check a dual certificate of the worst-case cost of fixed decisions.

    When ``block`` is omitted the multipliers of the evaluation LP are used.
    The block must be dual feasible and its value must match the primal
    worst-case cost within ``tol``.
    """
    from .kadapt_objective import evaluate_policies_canonical, feasible_policies

    opts = _opts(opts)
    can = canonicalize(inst)
    policies = np.atleast_2d(np.asarray(policies, float))
    primal, lp_block = evaluate_policies_canonical(can, x, w, policies, opts, ORACLE_ENGINE, with_duals=True)
    if block is None:
        block = lp_block
    if block is None or not math.isfinite(primal):
        return False
    keep = feasible_policies(can, x, w, policies)
    A, b = can.xi.A, can.xi.b
    w = np.asarray(w, float)
    alpha = np.asarray(block.alpha, float)
    beta = np.asarray(block.beta, float)
    beta_k = np.asarray(block.beta_k, float)
    gamma = np.asarray(block.gamma_k, float)
    scale = 1.0 + float(np.max(np.abs(np.concatenate([alpha, beta, beta_k.ravel(), gamma.ravel()]))))
    ftol = tol * scale
    if np.any(alpha < -ftol) or abs(alpha.sum() - 1.0) > ftol:
        return False
    if np.any(beta < -ftol) or np.any(beta_k < -ftol):
        return False
    dropped = [k for k in range(len(policies)) if k not in keep]
    if dropped and np.any(np.abs(alpha[dropped]) > ftol):
        return False
    if np.max(np.abs(A.T @ beta - (w * gamma).sum(axis=0)), initial=0.0) > ftol:
        return False
    for k, y in enumerate(policies):
        c = can.cost_vector(x, w, y)
        res = A.T @ beta_k[k] + w * gamma[k] - alpha[k] * c
        if np.max(np.abs(res), initial=0.0) > ftol:
            return False
    return abs(block.value(b) - primal) <= tol * (1.0 + abs(primal))


# ---------------------------------------------------------------------------
# constraint uncertainty


def brute_force_kadapt_constraint(inst: DdidInstance, K: int, eps: float, opts: Optional[SolverOptions] = None,
                                  w_fixed=None):
    """Exact epsilon-approximate K-adaptability value by enumeration."""
    from .kadapt_constraint import index_values

    opts = _opts(opts)
    can = canonicalize(inst)
    X = enumerate_members(can.setX, opts.oracle_cap)
    W = enumerate_members(can.setW, opts.oracle_cap) if w_fixed is None else [np.asarray(w_fixed, float)]
    Y = enumerate_members(can.setY, opts.oracle_cap)
    best, arg = math.inf, None
    for x in X:
        for w in W:
            for sub in _policy_subsets(Y, K):
                pols = np.array(sub)
                if len(pols) < K:
                    pols = np.vstack([pols] + [pols[-1:]] * (K - len(pols)))
                v = max(index_values(can, x, w, pols, eps, opts, ORACLE_ENGINE).values())
                if v < best - 1e-12:
                    best, arg = v, (x, w, pols)
    return report_value(inst, best), arg


def _slice_lp(inst, fixed, objective):
    m = MilpModel("slice")
    xi = m.add_vars("xi", inst.n_xi, -INF, INF)
    for r in range(inst.xi.n_rows):
        m.add_constr(LinExpr().add_dot(xi, inst.xi.A[r]), "<=", float(inst.xi.b[r]))
    for i, v in fixed.items():
        m.add_constr({int(xi[i]): 1.0}, "==", float(v))
    m.set_objective(LinExpr().add_dot(xi, objective))
    return solve_lp(m, None, ORACLE_ENGINE)


def scenario_value(inst: DdidInstance, x, w, policies, scenarios, tol: float = 1e-9) -> float:
    """Largest over ``scenarios`` of the cost of the best robustly feasible policy.

    For each observed scenario the slice of consistent parameters is formed,
    every policy is tested for robust feasibility over the slice and the
    cheapest worst-case cost is kept.  Returns the value in canonical sense
    (``+inf`` when some scenario leaves no feasible policy).
    """
    can = canonicalize(inst)
    w = np.asarray(w, float)
    obs = np.flatnonzero(w > 0.5)
    worst = -math.inf
    for xb in scenarios:
        fixed = {int(i): float(xb[i]) for i in obs}
        best = math.inf
        for y in np.atleast_2d(policies):
            if can.rhs_mode == "uncertain":
                Hm = can.rhs_matrix(x, w, y)
                g = can.lhs(x, w, y)
                ok = all(_slice_lp(can, fixed, Hm[l]).value >= g[l] - tol for l in range(can.L))
            else:
                ok = bool(np.all(can.lhs(x, w, y) <= can.h + tol))
            if not ok:
                continue
            best = min(best, -_slice_lp(can, fixed, -can.cost_vector(x, w, y)).value)
        worst = max(worst, best)
    return worst


def box_vertices(lower, upper) -> np.ndarray:
    return np.array(list(itertools.product(*zip(lower, upper))), dtype=float)


# ---------------------------------------------------------------------------
# piecewise-linear objectives


def _pwl_assignment_lp(inst, pwl, x, w, policies, assign, engine=ORACLE_ENGINE):
    """``max_{xi in lifted set} min_k piece_{assign_k}(xi^k, y^k)`` (canonical value)."""
    A, b = inst.xi.A, inst.xi.b
    N = inst.n_xi
    K = len(policies)
    m = MilpModel("pwl_assign")
    tau = m.add_var("tau", -INF, INF)
    xib = m.add_vars("xi_bar", N, -INF, INF)
    xik = m.add_vars("xi", (K, N), -INF, INF)
    for r in range(len(b)):
        m.add_constr(LinExpr().add_dot(xib, A[r]), "<=", float(b[r]))
    obs = np.flatnonzero(np.asarray(w) > 0.5)
    for k in range(K):
        for r in range(len(b)):
            m.add_constr(LinExpr().add_dot(xik[k], A[r]), "<=", float(b[r]))
        for i in obs:
            m.add_constr({int(xik[k, i]): 1.0, int(xib[i]): -1.0}, "==", 0.0)
        c = pwl.cost_vector(assign[k], x, w, policies[k])
        m.add_constr(LinExpr({tau: 1.0}).add_dot(xik[k], -c), "<=", 0.0)
    m.set_objective({tau: -1.0})
    res = solve_lp(m, None, engine)
    if res.status != "Optimal":
        raise RuntimeError(f"assignment LP ended with status {res.status}")
    return -res.value


def brute_force_pwl_value(inst: DdidInstance, pwl, x, w, policies, cap: int = 2 ** 14) -> float:
    """Worst-case piecewise-linear cost of fixed decisions by enumerating piece assignments.

    Uses ``max_xi min_k max_i f_i = max_{assignment} max_xi min_k f_{i_k}``, so
    one LP per assignment of a piece to every policy.
    """
    policies = np.atleast_2d(np.asarray(policies, float))
    K = len(policies)
    n = pwl.n_pieces ** K
    _check_cap(n, cap, "brute_force_pwl_value")
    best = -math.inf
    for assign in itertools.product(range(pwl.n_pieces), repeat=K):
        best = max(best, _pwl_assignment_lp(inst, pwl, x, w, policies, assign))
    return best


def static_pwl_value(inst: DdidInstance, pwl, opts: Optional[SolverOptions] = None) -> float:
    """Best single-policy value ``min_{x,y} max_i max_xi piece_i``: the no-information regret."""
    opts = _opts(opts)
    X = enumerate_members(inst.setX, opts.oracle_cap)
    Y = enumerate_members(inst.setY, opts.oracle_cap)
    w0 = np.zeros(inst.n_xi)
    best = math.inf
    for x in X:
        for y in Y:
            if inst.h is not None and np.any(inst.lhs(x, w0, y) > inst.h + 1e-9):
                continue
            v = max(-_slice_lp(inst, {}, -pwl.cost_vector(i, x, w0, y)).value for i in range(pwl.n_pieces))
            best = min(best, v)
    return best


def true_worst_case_regret(inst: DdidInstance, pwl, w_fixed, x_fixed=None, opts: Optional[SolverOptions] = None,
                           method: str = "feasibility") -> float:
    """Worst-case piecewise-linear cost of a measurement plan when every member of Y may be used.

    ``method="feasibility"`` solves the separation MILP with the full policy
    set; ``method="enumerate"`` uses :func:`brute_force_pwl_value` instead.
    """
    from .pwl import evaluate_pwl_fixed

    opts = _opts(opts)
    Y = enumerate_members(inst.setY, opts.oracle_cap)
    X = [np.zeros(inst.n_x)] if inst.n_x == 0 else (
        enumerate_members(inst.setX, opts.oracle_cap) if x_fixed is None else [np.asarray(x_fixed, float)])
    w = np.asarray(w_fixed, float)
    best = math.inf
    for x in X:
        feas = [y for y in Y if inst.h is None or np.all(inst.lhs(x, w, y) <= inst.h + 1e-9)]
        if not feas:
            continue
        pols = np.array(feas)
        if method == "enumerate":
            v = brute_force_pwl_value(inst, pwl, x, w, pols)
        else:
            v = evaluate_pwl_fixed(inst, pwl, x, w, pols, opts)
        best = min(best, v)
    return best


def static_multistage_value(ms, opts: Optional[SolverOptions] = None, cap: Optional[int] = None):
    """Best single-policy-per-period value of a multi-stage instance, by enumeration.

    Each period's plan must contain the previous one (and ``w0``).  With one
    policy per period nothing is learned that could be acted on, so the
    value of a choice is ``max_{xi in Xi} c^T xi`` for its summed cost vector.
    Returns ``(value in the instance's sense, (ws, ys))``.
    """
    opts = _opts(opts)
    cap = opts.oracle_cap if cap is None else cap
    can = ms.canonical()
    T = can.T
    W_sets = [enumerate_members(can.setW[t], cap) for t in range(T)]
    Y_sets = [enumerate_members(can.setY[t], cap) for t in range(T)]
    total = math.prod(len(s) for s in W_sets) * math.prod(len(s) for s in Y_sets)
    _check_cap(total, cap, "static multi-stage enumeration")
    A, b = can.xi.A, can.xi.b
    best, arg = math.inf, None
    for ws in itertools.product(*W_sets):
        prev = can.w0
        ok = True
        for w in ws:
            if np.any(w < prev - 0.5):
                ok = False
                break
            prev = w
        if not ok:
            continue
        for ys in itertools.product(*Y_sets):
            lhs = sum(can.V[t] @ ws[t] + can.W[t] @ ys[t] for t in range(T))
            if np.any(lhs > can.h + 1e-9):
                continue
            c = can.path_cost([[w] for w in ws], [[y] for y in ys], (0,) * T)
            m = MilpModel("static_ms")
            xi = m.add_vars("xi", can.n_xi, -INF, INF)
            for r in range(len(b)):
                m.add_constr(LinExpr().add_dot(xi, A[r]), "<=", float(b[r]))
            m.set_objective(LinExpr().add_dot(xi, -c))
            res = solve_lp(m, opts, ORACLE_ENGINE)
            if res.status != "Optimal":
                raise RuntimeError(f"oracle LP ended with status {res.status}")
            v = -res.value
            if v < best - 1e-12:
                best, arg = v, ([w.copy() for w in ws], [y.copy() for y in ys])
    value = best if ms.sense == "minimize" else -best
    return value + 0.0, arg


def arrangement_points(lines, lower, upper, delta: float = 1e-7) -> np.ndarray:
    """Vertices of the arrangement of a 2-D box with the given lines.

    ``lines`` holds pairs ``(a, c)`` describing ``a . xi = c``.  Each line is
    also added shifted by ``+-delta`` so that points just inside both sides
    of every threshold are present.  On each cell of the arrangement a
    piecewise-linear worst-case function is linear, so its supremum over the
    box is approached at these points.
    """
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    if lower.shape != (2,) or upper.shape != (2,):
        raise ValueError("arrangement_points works on 2-D boxes")
    all_lines = [(np.array([1.0, 0.0]), lower[0]), (np.array([1.0, 0.0]), upper[0]),
                 (np.array([0.0, 1.0]), lower[1]), (np.array([0.0, 1.0]), upper[1])]
    for a, c in lines:
        a = np.asarray(a, float)
        if np.linalg.norm(a) < 1e-12:
            continue
        for s in (-delta, 0.0, delta):
            all_lines.append((a, float(c) + s))
    pts = []
    for (a1, c1), (a2, c2) in itertools.combinations(all_lines, 2):
        M = np.vstack([a1, a2])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        p = np.linalg.solve(M, [c1, c2])
        if np.all(p >= lower - 1e-12) and np.all(p <= upper + 1e-12):
            pts.append(np.clip(p, lower, upper))
    return np.unique(np.round(np.array(pts), 12), axis=0)
