"""Estimator-style front end.

:class:`KAdaptabilityRO` follows the scikit-learn conventions: hyper-parameters
are constructor arguments (so ``get_params`` / ``set_params`` and ``clone``
work), :meth:`~KAdaptabilityRO.fit` takes the problem data and stores fitted
attributes with a trailing underscore, and :meth:`~KAdaptabilityRO.predict`
maps observations to the policy that should be implemented.

>>> from ddidro.instances import build_observation_cost_instance
>>> est = KAdaptabilityRO(K=2, method="constraint", eps=1e-4).fit(build_observation_cost_instance())
>>> est.w_[:2].tolist()  # the third coordinate is the constant 1
[1.0, 0.0]
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import DdidInstance, SolverOptions
from .validation import check_instance, check_positive_int

METHODS = ("objective", "constraint", "regret-mono", "regret-ccg", "multistage", "greedy")


class KAdaptabilityRO(BaseEstimator):
    """K-adaptable here-and-now decisions for a decision-dependent robust problem.

    Parameters
    ----------
    K : int
        Number of candidate recourse policies.
    method : str
        One of ``"objective"``, ``"constraint"``, ``"regret-mono"``,
        ``"regret-ccg"``, ``"multistage"`` or ``"greedy"``.  ``None`` picks
        ``objective`` or ``constraint`` from the right-hand side of the
        instance, or ``regret-ccg`` when a piecewise-linear objective is given.
    eps, delta, big_M : float, optional
        Constraint-approximation margin, CCG optimality tolerance and an
        explicit big-M bound (derived from the data when omitted).
    symmetry_breaking : bool, optional
        ``None`` lets each solver decide.
    greedy_base : str, optional
        Exact method used inside each greedy round.
    engine, time_limit, node_limit, seed
        Passed to the MILP layer.
    """

    def __init__(self, K: int = 2, method: Optional[str] = None, eps: Optional[float] = None,
                 delta: float = 1e-3, big_M: Optional[float] = None, symmetry_breaking: Optional[bool] = None,
                 greedy_base: Optional[str] = None, engine: str = "highs", time_limit: Optional[float] = None,
                 node_limit: Optional[int] = None, seed: int = 0):
        self.K = K
        self.method = method
        self.eps = eps
        self.delta = delta
        self.big_M = big_M
        self.symmetry_breaking = symmetry_breaking
        self.greedy_base = greedy_base
        self.engine = engine
        self.time_limit = time_limit
        self.node_limit = node_limit
        self.seed = seed

    def solver_options(self) -> SolverOptions:
        return SolverOptions(big_M=self.big_M, eps_feasibility=self.eps, ccg_delta=self.delta,
                             symmetry_breaking=self.symmetry_breaking, engine=self.engine,
                             time_limit=self.time_limit, node_limit=self.node_limit, seed=self.seed)

    def _resolve_method(self, inst, pwl) -> str:
        from .multistage import MultistageInstance

        if self.method is not None:
            if self.method not in METHODS:
                raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
            return self.method
        if isinstance(inst, MultistageInstance):
            return "multistage"
        if pwl is not None:
            return "regret-ccg"
        return "objective" if inst.rhs_mode == "constant" else "constraint"

    def fit(self, X, y=None, *, pwl=None, fixed: Optional[dict] = None) -> "KAdaptabilityRO":
        """Solve the problem ``X`` (an instance, or a path to an instance file).

        ``y`` is ignored and exists for pipeline compatibility.  ``pwl`` is the
        piecewise-linear objective of the regret methods; it may also be passed
        as ``X = (instance, pwl)``.
        """
        from .multistage import MultistageInstance, multistage_from_two_stage, solve_multistage

        inst = X
        if isinstance(X, tuple) and len(X) == 2:
            inst, pwl = X
        if isinstance(inst, str) or hasattr(inst, "__fspath__"):
            from .serialization import load_instance

            inst = load_instance(inst)
        if not isinstance(inst, (DdidInstance, MultistageInstance)):
            raise TypeError(f"expected a DdidInstance, got {type(inst).__name__}")
        K = check_positive_int(self.K, "K")
        method = self._resolve_method(inst, pwl)
        opts = self.solver_options()
        self.ccg_state_ = None
        if method == "multistage":
            ms = inst if isinstance(inst, MultistageInstance) else multistage_from_two_stage(check_instance(inst))
            sol = solve_multistage(ms, K, opts, fixed)
            self.instance_, self.pwl_, self.method_, self.solution_ = ms, None, method, sol
            self.status_, self.value_ = sol.status, sol.value
            self.w_ = None if sol.w is None else sol.w[0][0]
            self.x_, self.policies_ = None, None
            self.policy_tree_ = sol.policy_tree()
            return self
        if not isinstance(inst, DdidInstance):
            raise TypeError(f"method {method!r} needs a two-stage instance")
        check_instance(inst)
        if method in ("regret-mono", "regret-ccg") and pwl is None:
            raise ValueError(f"method {method!r} needs a piecewise-linear objective (pwl=...)")
        if method == "objective":
            from .kadapt_objective import solve_kadapt_objective

            sol = solve_kadapt_objective(inst, K, opts, fixed)
        elif method == "constraint":
            from .kadapt_constraint import solve_kadapt_constraint

            sol = solve_kadapt_constraint(inst, K, opts, fixed)
        elif method == "regret-mono":
            from .pwl import solve_pwl_monolithic

            sol = solve_pwl_monolithic(inst, pwl, K, opts, fixed)
        elif method == "regret-ccg":
            from .pwl import ccg_solve

            sol, self.ccg_state_ = ccg_solve(inst, pwl, K, opts, fixed)
        else:
            from .speedups import greedy_solve

            sol = greedy_solve(inst, K, opts, self.greedy_base, pwl)
        self.instance_, self.pwl_, self.method_, self.solution_ = inst, pwl, method, sol
        self.status_, self.value_ = sol.status, sol.value
        self.x_, self.w_, self.policies_ = sol.x, sol.w, sol.policies
        return self

    def predict(self, observations) -> np.ndarray:
        """Policy to implement for each observation.

        ``observations`` is a mapping ``{coordinate: value}``, a vector over
        all uncertain coordinates (unobserved entries are ignored), or a 2-D
        array with one such vector per row.  A single observation returns
        one policy vector; a batch returns one row per observation.
        """
        check_is_fitted(self, "solution_")
        if self.policies_ is None:
            raise ValueError(f"no policies to choose from (status {self.status_}, method {self.method_})")
        from .kadapt_objective import select_recourse_policy

        opts = self.solver_options()
        if isinstance(observations, dict):
            return self.policies_[select_recourse_policy(self.instance_, self.solution_, observations, opts)]
        obs = np.asarray(observations, dtype=float)
        if obs.ndim == 1:
            return self.policies_[select_recourse_policy(self.instance_, self.solution_, obs, opts)]
        return np.array([self.policies_[select_recourse_policy(self.instance_, self.solution_, o, opts)]
                         for o in obs])

    def predict_index(self, observation) -> int:
        """Index into ``policies_`` of the policy chosen for one observation."""
        check_is_fitted(self, "solution_")
        from .kadapt_objective import select_recourse_policy

        return select_recourse_policy(self.instance_, self.solution_, observation, self.solver_options())

    def evaluate(self, mode: str = "lp") -> float:
        """Re-evaluate the fitted decisions.

        ``"lp"`` uses the exact per-decision LP of the fitted method, while
        ``"true-utility"`` and ``"true-regret"`` compare against the fully
        adaptive recourse by enumeration (small instances only).
        """
        check_is_fitted(self, "solution_")
        from .evaluation import evaluate_solution

        return evaluate_solution(self.instance_, self.solution_, mode, pwl=self.pwl_,
                                 opts=self.solver_options())
