import math

import numpy as np
import pytest

from ddidro.core import BinaryFeasibleSet, DdidInstance, SolverOptions, UncertaintySet
from ddidro.instances import build_observation_cost_instance, build_threshold_instance, gen_random_constraint_instance
from ddidro.kadapt_constraint import (build_kadapt_constraint_mblp, enumerate_indices, evaluate_constraint_fixed,
                                      index_values, solve_exogenous_constraint, solve_kadapt_constraint)
from ddidro.oracles import arrangement_points, brute_force_kadapt_constraint, scenario_value

NONE = np.zeros(0)


def test_enumerate_indices_counts():
    assert [i.ell for i in enumerate_indices(1, 1)] == [(0,), (1,)]
    two = enumerate_indices(2, 1)
    assert len(two) == 4 and [i.ell for i in two if i.positive] == [(1, 1)]
    assert len(enumerate_indices(4, 4)) == 625
    with pytest.raises(ValueError, match="smaller K"):
        enumerate_indices(5, 9, cap=10_000)


def test_index_order_is_lexicographic():
    idx = [i.ell for i in enumerate_indices(3, 2)]
    assert idx == sorted(idx)


def test_observation_cost_static_value():
    sol = solve_kadapt_constraint(build_observation_cost_instance(), 1, SolverOptions(eps_feasibility=1e-4))
    assert sol.status == "Optimal"
    assert sol.value == pytest.approx(2.1, abs=1e-6)


def test_single_policy_is_a_robust_lp():
    # y = (1, 0) is the only robustly feasible policy; its worst case over the box is 2 + 0.1 with no observation
    inst = build_observation_cost_instance()
    v = evaluate_constraint_fixed(inst, NONE, np.zeros(3), [[1.0, 0.0]], 1e-4)
    assert v == pytest.approx(2.1, abs=1e-9)
    assert evaluate_constraint_fixed(inst, NONE, np.zeros(3), [[0.0, 1.0]], 1e-4) == math.inf


def test_solver_value_round_trips():
    inst = gen_random_constraint_instance(4)
    sol = solve_kadapt_constraint(inst, 2, SolverOptions(eps_feasibility=1e-3))
    assert evaluate_constraint_fixed(inst, sol.x, sol.w, sol.policies, 1e-3) == pytest.approx(sol.value, abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_monotone_in_eps_and_K(seed):
    inst = gen_random_constraint_instance(seed)
    v = {}
    for eps in (1e-3, 1e-2):
        for K in (1, 2):
            s = solve_kadapt_constraint(inst, K, SolverOptions(eps_feasibility=eps))
            assert s.status == "Optimal"
            v[eps, K] = s.value
    assert v[1e-3, 1] >= v[1e-2, 1] - 1e-6
    assert v[1e-3, 2] >= v[1e-2, 2] - 1e-6
    assert v[1e-3, 1] >= v[1e-3, 2] - 1e-6
    assert v[1e-3, 2] == pytest.approx(brute_force_kadapt_constraint(inst, 2, 1e-3)[0], abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_cover_property_against_scenarios(seed):
    rng = np.random.default_rng(seed)
    inst = gen_random_constraint_instance(seed)
    w = np.array([1.0, 1.0, 0.0])
    for _ in range(3):
        pols = rng.integers(0, 2, (2, 2)).astype(float)
        lines = []
        for y in pols:
            g, Hm = inst.lhs(NONE, w, y), inst.rhs_matrix(NONE, w, y)
            lines += [(Hm[l, :2], g[l] - Hm[l, 2]) for l in range(inst.L)]
        pts = arrangement_points(lines, [-1, -1], [1, 1])
        scen = np.c_[pts, np.ones(len(pts))]
        v = evaluate_constraint_fixed(inst, NONE, w, pols, 1e-6)
        sv = scenario_value(inst, NONE, w, pols, scen)
        assert (v == sv == math.inf) or abs(v - sv) <= 1e-4


def test_unobserved_slice_uses_inner_lp():
    # nothing observed: one policy must work for the whole set, the same as a robust LP per row
    inst = gen_random_constraint_instance(1)
    w = np.zeros(3)
    pols = np.array([[1.0, 1.0], [1.0, 1.0]])
    v = evaluate_constraint_fixed(inst, NONE, w, pols, 1e-6)
    sv = scenario_value(inst, NONE, w, pols, [np.array([0.0, 0.0, 1.0])])
    assert v == pytest.approx(sv, abs=1e-7)


def test_infeasible_verdict_confirmed_by_enumeration():
    inst = build_threshold_instance()  # literal box: the upper rows fail near the lower corner
    for K in (1, 2):
        sol = solve_kadapt_constraint(inst, K)
        assert sol.status == "Infeasible" and sol.value == math.inf
        assert brute_force_kadapt_constraint(inst, K, 1e-4)[0] == math.inf


def test_positive_index_blocks_certify_violation():
    inst = build_threshold_instance(lower=1e-3 - 1.0)
    vals = index_values(inst, NONE, np.array([1.0, 1.0, 0.0]), np.array([[0, 0], [0, 1], [1, 0], [1, 1.0]]), 1e-4)
    assert all(v == -math.inf for ell, v in vals.items() if all(e > 0 for e in ell))


def _exogenous(seed):
    b = gen_random_constraint_instance(seed)
    n = b.n_xi
    xi = UncertaintySet(b.xi.A, b.xi.b, np.ones(n, bool))
    return DdidInstance.build(xi, n_x=0, n_y=b.n_y, Qm=b.Qm, Wrec=b.Wrec, H=b.H,
                              setW=BinaryFeasibleSet.cardinality(n, n, "=="))


@pytest.mark.parametrize("seed", range(4))
def test_exogenous_reduction(seed):
    inst = _exogenous(seed)
    opts = SolverOptions(eps_feasibility=1e-3)
    for K in (1, 2):
        full = solve_kadapt_constraint(inst, K, opts)
        red = solve_exogenous_constraint(inst, K, opts)
        assert full.value == pytest.approx(red.value, abs=1e-6)


def test_model_is_canonical_only():
    inst = build_observation_cost_instance()
    flipped = DdidInstance.build(inst.xi, n_y=2, Qm=inst.Qm, Wrec=inst.Wrec, H=inst.H, sense="maximize")
    with pytest.raises(ValueError):
        build_kadapt_constraint_mblp(flipped, 1)
