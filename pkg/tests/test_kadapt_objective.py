import math

import numpy as np
import pytest

from ddidro.core import BinaryFeasibleSet, DdidInstance, SolverOptions, UncertaintySet, canonicalize
from ddidro.instances import build_pe_utility, gen_random_objective_instance, gen_synthetic_pe
from ddidro.kadapt_objective import (build_kadapt_objective_mblp, evaluate_policies_lp, select_recourse_policy,
                                     solve_exogenous_objective, solve_kadapt_objective)
from ddidro.oracles import (box_vertices, brute_force_kadapt_objective, exact_two_stage_objective,
                            scenario_value)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("K", [1, 2])
def test_matches_enumeration(seed, K):
    inst = gen_random_objective_instance(seed)
    sol = solve_kadapt_objective(inst, K)
    assert sol.status == "Optimal"
    assert sol.value == pytest.approx(brute_force_kadapt_objective(inst, K)[0], abs=1e-6)


def test_reported_value_is_reproduced_by_evaluation():
    inst = gen_random_objective_instance(3)
    sol = solve_kadapt_objective(inst, 2)
    assert evaluate_policies_lp(inst, sol.x, sol.w, sol.policies) == pytest.approx(sol.value, abs=1e-6)


def test_value_nonincreasing_in_K():
    inst = build_pe_utility(gen_synthetic_pe(4, 2, 0.0, 1, seed=7))  # maximize
    vals = [solve_kadapt_objective(inst, K).value for K in (1, 2, 3)]
    assert vals[0] <= vals[1] + 1e-6 <= vals[2] + 2e-6
    assert vals[-1] <= exact_two_stage_objective(inst) + 1e-6


def test_fixed_w_matches_enumeration():
    inst = gen_random_objective_instance(5)
    w = np.array([1.0, 0.0, 0.0])
    sol = solve_kadapt_objective(inst, 2, fixed={"w": w})
    np.testing.assert_array_equal(sol.w, w)
    assert sol.value == pytest.approx(brute_force_kadapt_objective(inst, 2, w_fixed=w)[0], abs=1e-6)


def _exogenous(seed):
    base = gen_random_objective_instance(seed)
    n = base.n_xi
    return DdidInstance.build(base.xi, n_x=base.n_x, n_y=base.n_y, C=base.C, Qm=base.Qm, T=base.T,
                              Wrec=base.Wrec, h=base.h, setX=base.setX, setY=base.setY,
                              setW=BinaryFeasibleSet.cardinality(n, n, "=="))


@pytest.mark.parametrize("seed", range(3))
def test_exogenous_reduction(seed):
    inst = _exogenous(seed)
    for K in (1, 2):
        full = solve_kadapt_objective(inst, K)
        red = solve_exogenous_objective(inst, K)
        np.testing.assert_array_equal(full.w, np.ones(inst.n_xi))
        assert full.value == pytest.approx(red.value, abs=1e-6)


def test_exogenous_reduction_rejects_observation_costs():
    with pytest.raises(ValueError):
        solve_exogenous_objective(gen_random_objective_instance(0), 1)


def test_scenario_cover_agrees_with_lp():
    # on a box the worst case of a fixed tuple is attained at a vertex of every slice
    xi = UncertaintySet.box([-1, 0, -2], [1, 2, 1])
    inst = DdidInstance.build(xi, n_y=3, Qm=np.array([[1, -1, 0.5], [-2, 1, 0], [0.5, 1, -1.0]]),
                              D=np.diag([0.1, 0.1, 0.1]), setY=BinaryFeasibleSet.unit_simplex(3))
    w = np.array([1.0, 0.0, 1.0])
    pols = np.eye(3)[:2]
    lp = evaluate_policies_lp(inst, np.zeros(0), w, pols)
    sv = scenario_value(inst, np.zeros(0), w, pols, box_vertices([-1, 0, -2], [1, 2, 1]))
    assert lp == pytest.approx(sv, abs=1e-7)


def test_select_recourse_policy_picks_best_in_slice():
    inst = gen_random_objective_instance(2)
    sol = solve_kadapt_objective(inst, 2)
    can = canonicalize(inst)
    obs = np.flatnonzero(sol.w > 0.5)
    rng = np.random.default_rng(0)
    lo, hi = -np.abs(inst.xi.b[inst.n_xi:2 * inst.n_xi]), inst.xi.b[:inst.n_xi]
    for _ in range(5):
        point = rng.uniform(lo, hi)
        k = select_recourse_policy(inst, sol, point)
        costs = [scenario_value(inst, sol.x, sol.w, sol.policies[j:j + 1], [point]) for j in range(2)]
        if all(math.isfinite(c) for c in costs):
            assert costs[k] <= min(costs) + 1e-7
    if obs.size == 0:
        assert select_recourse_policy(inst, sol, {}) in (0, 1)


def test_infeasible_recourse_reported():
    xi = UncertaintySet.box([0.0], [1.0])
    inst = DdidInstance.build(xi, n_y=1, Qm=[[1.0]], Wrec=[[1.0]], h=[-1.0])
    sol = solve_kadapt_objective(inst, 1)
    assert sol.status == "Infeasible" and sol.value == math.inf


def test_symmetry_rows_present_and_value_kept():
    inst = gen_random_objective_instance(4)
    on = solve_kadapt_objective(inst, 2, SolverOptions(symmetry_breaking=True))
    off = solve_kadapt_objective(inst, 2, SolverOptions(symmetry_breaking=False))
    assert on.value == pytest.approx(off.value, abs=1e-6)
    m_on = build_kadapt_objective_mblp(canonicalize(inst), 2, SolverOptions(symmetry_breaking=True))
    m_off = build_kadapt_objective_mblp(canonicalize(inst), 2, SolverOptions(symmetry_breaking=False))
    assert m_on.n_rows > m_off.n_rows


def test_objective_pipeline_rejects_uncertain_rhs():
    from ddidro.instances import build_observation_cost_instance

    with pytest.raises(ValueError):
        solve_kadapt_objective(build_observation_cost_instance(), 1)
