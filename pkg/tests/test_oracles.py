import dataclasses
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from ddidro.core import BinaryFeasibleSet, DdidInstance, UncertaintySet, canonicalize
from ddidro.instances import (build_pe_regret, build_pe_utility, build_rnd_portfolio, gen_random_objective_instance,
                              gen_synthetic_pe)
from ddidro.kadapt_objective import evaluate_policies_canonical, solve_kadapt_objective
from ddidro.oracles import (brute_force_kadapt_objective, enumerate_members, exact_two_stage_objective,
                            static_pwl_value, true_worst_case_regret, verify_duality_block)
from ddidro.pwl import ccg_solve
from ddidro.core import SolverOptions


def test_enumerate_members_examples():
    assert [m.tolist() for m in enumerate_members(BinaryFeasibleSet.unit_simplex(3))] == [
        [0, 0, 1], [0, 1, 0], [1, 0, 0]]
    assert len(enumerate_members(BinaryFeasibleSet.cardinality(4, 2))) == 6
    empty = BinaryFeasibleSet(2, ((np.ones(2), ">=", 3.0),))
    with pytest.warns(RuntimeWarning):
        assert enumerate_members(empty) == []
    with pytest.raises(ValueError):
        enumerate_members(BinaryFeasibleSet.free(20), cap=2 ** 10)


def test_all_policies_give_two_stage_value():
    inst = gen_random_objective_instance(6)
    n_y_members = len(enumerate_members(inst.setY))
    assert brute_force_kadapt_objective(inst, n_y_members)[0] == pytest.approx(
        exact_two_stage_objective(inst), abs=1e-9)


def test_no_feasible_policy_both_sides():
    xi = UncertaintySet.box([0.0, 0.0], [1.0, 1.0])
    inst = DdidInstance.build(xi, n_y=2, Qm=np.eye(2), Wrec=[[1.0, 1.0]], h=[-1.0])
    assert brute_force_kadapt_objective(inst, 1)[0] == math.inf
    assert solve_kadapt_objective(inst, 1).value == math.inf


def test_exact_two_stage_on_pe_extremes():
    # no queries: one item for all scenarios; all items queried without noise: best item per scenario
    pe0 = gen_synthetic_pe(4, 2, 0.0, 0, seed=5)
    inst0 = build_pe_utility(pe0)
    A, b, I = inst0.xi.A, inst0.xi.b, 4
    static = max(linprog(np.eye(A.shape[1])[i], A_ub=A, b_ub=b, bounds=(None, None)).fun for i in range(I))
    assert exact_two_stage_objective(inst0) == pytest.approx(static, abs=1e-7)

    instI = build_pe_utility(dataclasses.replace(pe0, Q=I))
    n = A.shape[1]
    c = np.r_[np.zeros(n), 1.0]  # min t subject to t >= xi_i for every item
    A_ub = np.vstack([np.c_[A, np.zeros(len(b))], np.c_[np.eye(n)[:I], -np.ones(I)]])
    full = linprog(c, A_ub=A_ub, b_ub=np.r_[b, np.zeros(I)], bounds=(None, None)).fun
    assert exact_two_stage_objective(instI) == pytest.approx(full, abs=1e-7)


def test_true_regret_extremes():
    inst, pwl = build_pe_regret(gen_synthetic_pe(4, 2, 0.0, 4, seed=2))
    w = np.r_[np.ones(4), np.zeros(inst.n_xi - 4)]
    assert true_worst_case_regret(inst, pwl, w) == pytest.approx(0.0, abs=1e-7)
    inst0, pwl0 = build_pe_regret(gen_synthetic_pe(4, 2, 0.0, 0, seed=2))
    assert true_worst_case_regret(inst0, pwl0, np.zeros(inst0.n_xi)) == pytest.approx(
        static_pwl_value(inst0, pwl0), abs=1e-7)
    assert true_worst_case_regret(inst0, pwl0, np.zeros(inst0.n_xi), method="enumerate") == pytest.approx(
        static_pwl_value(inst0, pwl0), abs=1e-7)


def test_true_regret_bounds_ccg_solution():
    inst, pwl = build_pe_regret(gen_synthetic_pe(4, 2, 0.5, 1, seed=3))
    sol, _ = ccg_solve(inst, pwl, 2, SolverOptions(ccg_delta=1e-3))
    assert true_worst_case_regret(inst, pwl, sol.w) <= sol.value + 1e-6


def _random_decisions(inst, rng, K=2):
    can = canonicalize(inst)
    X, W, Y = (enumerate_members(s) for s in (can.setX, can.setW, can.setY))
    x = X[rng.integers(len(X))] if X else np.zeros(0)
    w = W[rng.integers(len(W))]
    pols = np.array([Y[rng.integers(len(Y))] for _ in range(K)])
    return can, x, w, pols


FAMILIES = {
    "random": lambda s: gen_random_objective_instance(s),
    "pe": lambda s: build_pe_utility(gen_synthetic_pe(4, 2, 0.5, 2, s)),
    "rnd": lambda s: build_rnd_portfolio(3, 2, 0.8, 1.5, seed=s),
}


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_duality_blocks_verify(family):
    rng = np.random.default_rng(11)
    for t in range(5):
        can, x, w, pols = _random_decisions(FAMILIES[family](t), rng)
        if not math.isfinite(evaluate_policies_canonical(can, x, w, pols)):
            continue
        assert verify_duality_block(can, x, w, pols)


def test_corrupted_dual_rejected_and_zero_plan_accepted():
    inst = gen_random_objective_instance(1)
    can = canonicalize(inst)
    x, pols = np.zeros(1), np.array([[1.0, 0.0], [0.0, 1.0]])
    w = np.zeros(3)
    assert verify_duality_block(can, x, w, pols)
    _, block = evaluate_policies_canonical(can, x, w, pols, with_duals=True)
    bad = dataclasses.replace(block, beta=np.asarray(block.beta) + 0.5)
    assert not verify_duality_block(can, x, w, pols, block=bad)
    bad2 = dataclasses.replace(block, alpha=np.asarray(block.alpha) * 2.0)
    assert not verify_duality_block(can, x, w, pols, block=bad2)
