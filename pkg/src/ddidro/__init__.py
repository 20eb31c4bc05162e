"""K-adaptable robust optimization with decision-dependent information discovery."""
from .core import (
    MAXIMIZE, MINIMIZE, BinaryFeasibleSet, DdidInstance, SolverOptions, UncertaintySet, canonicalize,
    validate_instance,
)
from .estimators import KAdaptabilityRO
from .evaluation import evaluate_solution
from .kadapt_constraint import evaluate_constraint_fixed, solve_kadapt_constraint
from .kadapt_objective import evaluate_policies_lp, select_recourse_policy, solve_kadapt_objective
from .multistage import MultistageInstance, multistage_from_two_stage, solve_multistage
from .pwl import PwlObjective, ccg_solve, solve_pwl_monolithic, wcar_to_pwl
from .serialization import load_instance, load_solution, save_instance, save_solution
from .solution import KAdaptSolution
from .speedups import greedy_solve

__version__ = "0.1.0"

__all__ = [
    "MAXIMIZE", "MINIMIZE", "BinaryFeasibleSet", "DdidInstance", "SolverOptions", "UncertaintySet",
    "canonicalize", "validate_instance", "KAdaptabilityRO", "evaluate_solution", "evaluate_constraint_fixed",
    "solve_kadapt_constraint", "evaluate_policies_lp", "select_recourse_policy", "solve_kadapt_objective",
    "MultistageInstance", "multistage_from_two_stage", "solve_multistage", "PwlObjective", "ccg_solve",
    "solve_pwl_monolithic", "wcar_to_pwl", "load_instance", "load_solution", "save_instance", "save_solution",
    "KAdaptSolution", "greedy_solve",
]
