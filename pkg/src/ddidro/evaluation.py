"""Re-evaluation of a stored solution under the available evaluation protocols."""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .core import DdidInstance, SolverOptions

MODES = ("lp", "true-utility", "true-regret")


def _x(inst, sol):
    return np.zeros(inst.n_x) if sol.x is None else np.asarray(sol.x, float)


def evaluate_solution(inst, sol, mode: str = "lp", pwl=None, opts: Optional[SolverOptions] = None) -> float:
    """Value of ``sol`` on ``inst`` in the instance's sense.

    ``lp``
        Worst case of the stored decisions and policies: the evaluation LP for
        objective uncertainty, the per-index LPs for constraint uncertainty,
        the separation problem when ``pwl`` is given, and the scenario-tree LP
        for multi-stage solutions.
    ``true-utility``
        Worst case of the stored ``(x, w)`` when the recourse may be any member
        of the policy set, i.e. with full adaptivity after the observation.
    ``true-regret``
        The same for the piecewise-linear objective ``pwl``.

    The ``true-*`` modes enumerate the policy set and are limited by
    ``opts.oracle_cap``.
    """
    from .multistage import MultistageInstance, evaluate_multistage_fixed

    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    opts = opts or SolverOptions()
    if isinstance(inst, MultistageInstance):
        if mode != "lp":
            raise ValueError("multi-stage solutions only support mode 'lp'")
        return evaluate_multistage_fixed(inst, sol.w, sol.y, opts)
    if not isinstance(inst, DdidInstance):
        raise TypeError(f"expected an instance, got {type(inst).__name__}")
    if sol.w is None:
        raise ValueError(f"solution has no decisions (status {sol.status})")
    x, w = _x(inst, sol), np.asarray(sol.w, float)
    if mode == "true-regret":
        if pwl is None:
            raise ValueError("mode 'true-regret' needs a piecewise-linear objective")
        from .oracles import true_worst_case_regret

        return true_worst_case_regret(inst, pwl, w, x, opts)
    if mode == "true-utility":
        if inst.rhs_mode != "constant":
            raise ValueError("mode 'true-utility' needs an instance with a constant right-hand side")
        from .oracles import exact_two_stage_objective

        return exact_two_stage_objective(inst, w, opts, x)
    policies = np.atleast_2d(np.asarray(sol.policies, float))
    if pwl is not None:
        from .pwl import evaluate_pwl_fixed

        return evaluate_pwl_fixed(inst, pwl, x, w, policies, opts)
    if inst.rhs_mode == "uncertain":
        from .kadapt_constraint import evaluate_constraint_fixed

        return evaluate_constraint_fixed(inst, x, w, policies, sol.info.get("eps"), opts)
    from .kadapt_objective import evaluate_policies_lp

    return evaluate_policies_lp(inst, x, w, policies, opts)


def finite_or_none(v: float):
    return None if v is None or not math.isfinite(v) else float(v)
