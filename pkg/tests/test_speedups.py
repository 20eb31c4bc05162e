import numpy as np
import pytest

from ddidro.core import SolverOptions
from ddidro.instances import build_pe_regret, build_pe_utility, gen_random_constraint_instance, \
    gen_random_objective_instance, gen_synthetic_pe
from ddidro.kadapt_constraint import solve_kadapt_constraint
from ddidro.kadapt_objective import solve_kadapt_objective
from ddidro.milp import MilpModel, solve_milp
from ddidro.pwl import ccg_solve
from ddidro.speedups import add_pe_symmetry_breaking, add_symmetry_breaking, greedy_solve, is_lex_nonincreasing

ON, OFF = SolverOptions(symmetry_breaking=True), SolverOptions(symmetry_breaking=False)


def _fixed_policies(tuple_, unit=False):
    m = MilpModel("sym")
    y = m.add_vars("y", np.shape(tuple_), binary=True, group="y")
    (add_pe_symmetry_breaking if unit else add_symmetry_breaking)(m, y)
    for v, val in zip(y.ravel(), np.asarray(tuple_, float).ravel()):
        m.fix(int(v), float(val))
    return solve_milp(m).status


def test_single_entry_base_case():
    assert _fixed_policies([[1], [0]]) == "Optimal"
    assert _fixed_policies([[0], [1]]) == "Infeasible"


def test_permuted_tuple_is_cut_off():
    ordered = [[1, 0, 1], [1, 0, 0], [0, 1, 1]]
    assert is_lex_nonincreasing(ordered)
    assert _fixed_policies(ordered) == "Optimal"
    assert _fixed_policies([ordered[1], ordered[0], ordered[2]]) == "Infeasible"
    assert _fixed_policies([[1, 0, 1], [1, 0, 1]]) == "Optimal"  # equal policies stay allowed


def test_unit_vector_variant():
    assert _fixed_policies([[1, 0, 0], [0, 0, 1]], unit=True) == "Optimal"
    assert _fixed_policies([[0, 0, 1], [1, 0, 0]], unit=True) == "Infeasible"
    assert _fixed_policies([[0, 1, 0], [0, 1, 0]], unit=True) == "Infeasible"
    with pytest.raises(ValueError):
        add_symmetry_breaking(MilpModel(), np.zeros((1, 2), int))


@pytest.mark.parametrize("seed", range(10))
def test_symmetry_breaking_keeps_value_objective(seed):
    inst = gen_random_objective_instance(seed, n_y=3)
    a, b = solve_kadapt_objective(inst, 3, ON), solve_kadapt_objective(inst, 3, OFF)
    assert a.value == pytest.approx(b.value, abs=1e-6)
    assert is_lex_nonincreasing(a.policies)


@pytest.mark.parametrize("seed", range(3))
def test_symmetry_breaking_keeps_value_other_pipelines(seed):
    inst = gen_random_constraint_instance(seed)
    o = SolverOptions(eps_feasibility=1e-3)
    a = solve_kadapt_constraint(inst, 2, o.replace(symmetry_breaking=True))
    b = solve_kadapt_constraint(inst, 2, o.replace(symmetry_breaking=False))
    assert a.value == pytest.approx(b.value, abs=1e-6)
    pe = gen_synthetic_pe(4, 2, 0.5, 1, seed)
    util = build_pe_utility(pe)
    assert solve_kadapt_objective(util, 3, ON).value == pytest.approx(solve_kadapt_objective(util, 3, OFF).value,
                                                                      abs=1e-6)
    inst, pwl = build_pe_regret(pe)
    ca = ccg_solve(inst, pwl, 2, SolverOptions(symmetry_breaking=True, ccg_delta=1e-3))[0]
    cb = ccg_solve(inst, pwl, 2, SolverOptions(symmetry_breaking=False, ccg_delta=1e-3))[0]
    assert abs(ca.value - cb.value) <= 1e-3 + 1e-6


def test_greedy_with_one_policy_is_exact():
    inst = gen_random_objective_instance(2)
    assert greedy_solve(inst, 1).value == pytest.approx(solve_kadapt_objective(inst, 1).value, abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_greedy_sandwich(seed):
    inst = gen_random_objective_instance(seed, n_y=3)
    g = greedy_solve(inst, 3)
    rounds = g.info["round_values"]
    exact = [solve_kadapt_objective(inst, K).value for K in (1, 2, 3)]
    assert rounds[0] == pytest.approx(exact[0], abs=1e-6)
    for k in range(1, 3):
        assert exact[k] <= rounds[k] + 1e-6
        assert rounds[k] <= rounds[k - 1] + 1e-6
    assert g.policies.shape == (3, 3)
