"""Model strengtheners and the greedy heuristic.

Permuting the candidate policies of a K-adaptability solution gives another
solution of equal cost.  The rows added here keep only lexicographically
non-increasing policy tuples, which removes that symmetry without changing
the optimal value.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .core import SolverOptions
from .milp import LinExpr, MilpModel
from .solution import KAdaptSolution


def add_symmetry_breaking(model: MilpModel, policy_vars) -> MilpModel:
    """Order policies lexicographically using difference indicators.

    ``z[k, i] = 1`` exactly when policies ``k`` and ``k + 1`` differ in entry
    ``i``, and ``y[k, i] >= y[k+1, i] - sum_{i' < i} z[k, i']`` then forces the
    first differing entry to favour policy ``k``.
    """
    y = np.asarray(policy_vars)
    K, n = y.shape
    if K < 2:
        raise ValueError("symmetry breaking needs K >= 2")
    z = model.add_vars("z_sym", (K - 1, n), binary=True, group="z_sym")
    for k in range(K - 1):
        for i in range(n):
            a, b, zi = int(y[k, i]), int(y[k + 1, i]), int(z[k, i])
            model.add_constr({zi: 1.0, a: -1.0, b: -1.0}, "<=", 0.0)
            model.add_constr({zi: 1.0, a: 1.0, b: 1.0}, "<=", 2.0)
            model.add_constr({zi: 1.0, a: -1.0, b: 1.0}, ">=", 0.0)
            model.add_constr({zi: 1.0, a: 1.0, b: -1.0}, ">=", 0.0)
        for i in range(n):
            expr = LinExpr({int(y[k, i]): 1.0}).add(int(y[k + 1, i]), -1.0)
            for ip in range(i):
                expr.add(int(z[k, ip]), 1.0)
            model.add_constr(expr, ">=", 0.0)
    return model


def add_pe_symmetry_breaking(model: MilpModel, policy_vars) -> MilpModel:
    """Symmetry breaking for policies that are unit vectors.

    Each item is recommended by at most one policy, and the lexicographic rows
    need no auxiliary binaries: two unit vectors agree on all entries before
    ``i`` exactly when neither has a one there.
    """
    y = np.asarray(policy_vars)
    K, n = y.shape
    if K > n:
        raise ValueError("the unit-vector variant needs K <= number of items")
    for i in range(n):
        model.add_constr(LinExpr({int(y[k, i]): 1.0 for k in range(K)}), "<=", 1.0)
    for k in range(K - 1):
        for i in range(n):
            expr = LinExpr({int(y[k, i]): 1.0}).add(int(y[k + 1, i]), -1.0)
            for ip in range(i):
                expr.add(int(y[k, ip]), 1.0).add(int(y[k + 1, ip]), 1.0)
            model.add_constr(expr, ">=", 0.0)
    return model


def is_lex_nonincreasing(policies) -> bool:
    """Whether consecutive policies are lexicographically non-increasing."""
    p = np.asarray(policies)
    for k in range(len(p) - 1):
        a, b = tuple(p[k].tolist()), tuple(p[k + 1].tolist())
        if a < b:
            return False
    return True


def _exact_solver(method: str):
    if method == "objective":
        from .kadapt_objective import solve_kadapt_objective

        return lambda inst, K, opts, fixed, pwl: solve_kadapt_objective(inst, K, opts, fixed)
    if method == "constraint":
        from .kadapt_constraint import solve_kadapt_constraint

        return lambda inst, K, opts, fixed, pwl: solve_kadapt_constraint(inst, K, opts, fixed)
    if method == "regret-mono":
        from .pwl import solve_pwl_monolithic

        return lambda inst, K, opts, fixed, pwl: solve_pwl_monolithic(inst, pwl, K, opts, fixed)
    if method == "regret-ccg":
        from .pwl import ccg_solve

        return lambda inst, K, opts, fixed, pwl: ccg_solve(inst, pwl, K, opts, fixed)[0]
    raise ValueError(f"unknown method {method!r}")


def greedy_solve(inst, K: int, opts: Optional[SolverOptions] = None, method: Optional[str] = None,
                 pwl=None) -> KAdaptSolution:
    """Grow the policy set one policy at a time.

    Round ``k`` solves the ``k``-adaptability problem with the first ``k - 1``
    policies frozen at the previous round's values, while ``x`` and ``w`` stay
    free.  The returned solution carries the value of every round in
    ``info["round_values"]`` (non-increasing in minimization sense).
    """
    opts = opts or SolverOptions()
    opts = opts.replace(symmetry_breaking=False)
    if method is None:
        if pwl is not None:
            method = "regret-ccg"
        else:
            method = "objective" if inst.rhs_mode == "constant" else "constraint"
    solver = _exact_solver(method)
    frozen = None
    rounds = []
    sol = None
    for k in range(1, K + 1):
        fixed = {"policies": frozen} if frozen is not None else None
        sol = solver(inst, k, opts, fixed, pwl)
        rounds.append(float(sol.value))
        if sol.policies is None:
            break
        frozen = np.asarray(sol.policies)[:k]
    sol.info["round_values"] = rounds
    sol.info["greedy"] = True
    sol.method = f"greedy-{method}"
    sol.K = K
    return sol
