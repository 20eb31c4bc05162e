import numpy as np
import pytest

from ddidro.core import DdidInstance, SolverOptions, UncertaintySet, canonicalize
from ddidro.instances import build_pe_regret, gen_random_objective_instance, gen_synthetic_pe
from ddidro.kadapt_objective import solve_kadapt_objective
from ddidro.oracles import brute_force_pwl_value, static_pwl_value, true_worst_case_regret
from ddidro.pwl import (PieceIndex, PwlObjective, ccg_solve, evaluate_pwl_fixed, separate, solve_pwl_monolithic,
                        wcar_to_pwl)

OPTS = SolverOptions(ccg_delta=1e-3)


def test_pe_regret_piece_count_and_self_regret():
    inst, pwl = build_pe_regret(gen_synthetic_pe(3, 2, 0.0, 1, seed=0))
    assert pwl.n_pieces == 3
    xi = np.random.default_rng(1).uniform(0, 1, inst.n_xi)
    e2 = np.array([0.0, 1.0, 0.0])
    x, w = np.zeros(0), np.zeros(inst.n_xi)
    assert float(xi @ pwl.cost_vector(1, x, w, e2)) == pytest.approx(0.0, abs=1e-12)


def test_all_zero_data_gives_one_zero_piece():
    inst = DdidInstance.build(UncertaintySet.box([0, 0], [1, 1]), n_y=2)
    pwl = wcar_to_pwl(inst)
    assert pwl.n_pieces == 1
    assert not any(np.any(a) for a in pwl.pieces[0])


def test_max_piece_equals_regret_formula():
    inst, pwl = build_pe_regret(gen_synthetic_pe(4, 2, 0.0, 1, seed=3))
    rng = np.random.default_rng(0)
    x, w = np.zeros(0), np.zeros(inst.n_xi)
    for _ in range(20):
        xi = rng.uniform(-1, 1, inst.n_xi)
        y = np.eye(4)[rng.integers(4)]
        assert pwl.value(xi, x, w, y) == pytest.approx(xi[:4].max() - xi[:4] @ y, abs=1e-12)


def test_piece_index_validation():
    assert str(PieceIndex((0, 2))) == "1-3"
    with pytest.raises(ValueError):
        PieceIndex((0, 3)).check(3, 2)


def test_single_piece_collapses_to_linear_objective():
    inst = gen_random_objective_instance(1)
    can = canonicalize(inst)
    pwl = PwlObjective(((can.C, can.D, can.Qm),))
    for K in (1, 2):
        ref = solve_kadapt_objective(inst, K).value
        assert solve_pwl_monolithic(inst, pwl, K).value == pytest.approx(ref, abs=1e-6)
    sol, state = ccg_solve(inst, pwl, 1, OPTS)
    assert len(state.iterations) == 1
    assert sol.value == pytest.approx(solve_kadapt_objective(inst, 1).value, abs=1e-6)


def test_full_observation_gives_zero_regret():
    inst, pwl = build_pe_regret(gen_synthetic_pe(3, 2, 0.0, 3, seed=4))
    sol = solve_pwl_monolithic(inst, pwl, 3)
    assert sol.value == pytest.approx(0.0, abs=1e-6)
    assert true_worst_case_regret(inst, pwl, sol.w) == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_separation_matches_enumeration(seed):
    inst, pwl = build_pe_regret(gen_synthetic_pe(4, 2, 0.5, 2, seed=seed))
    rng = np.random.default_rng(seed)
    w = np.zeros(inst.n_xi)
    w[rng.choice(4, 2, replace=False)] = 1
    pols = np.eye(4)[rng.choice(4, 2, replace=False)]
    theta, idx = separate(inst, pwl, np.zeros(0), w, pols, OPTS)
    assert theta == pytest.approx(brute_force_pwl_value(inst, pwl, np.zeros(0), w, pols), abs=1e-6)
    assert idx is not None and len(idx.i) == 2


def test_identical_policies_reduce_to_one():
    inst, pwl = build_pe_regret(gen_synthetic_pe(4, 2, 0.2, 1, seed=2))
    w = np.r_[1.0, np.zeros(inst.n_xi - 1)]
    y = np.eye(4)[[2]]
    v1 = evaluate_pwl_fixed(inst, pwl, np.zeros(0), w, y, OPTS)
    v2 = evaluate_pwl_fixed(inst, pwl, np.zeros(0), w, np.vstack([y, y]), OPTS)
    assert v1 == pytest.approx(v2, abs=1e-7)


@pytest.mark.parametrize("seed", range(3))
def test_ccg_agrees_with_monolithic(seed):
    inst, pwl = build_pe_regret(gen_synthetic_pe(5, 2, 0.5, 1, seed=seed))
    mono = solve_pwl_monolithic(inst, pwl, 2, OPTS)
    sol, state = ccg_solve(inst, pwl, 2, OPTS)
    assert state.status == "Optimal"
    assert abs(sol.value - mono.value) <= 1e-3 + 1e-6
    lbs = [r["LB"] for r in state.iterations]
    assert all(b >= a - 1e-9 for a, b in zip(lbs, lbs[1:]))
    added = [r["index_added"] for r in state.iterations if r["index_added"]]
    assert len(added) == len(set(added))
    assert all(r["theta"] >= r["tau"] - 1e-6 for r in state.iterations)


def test_regret_bounds_for_normalized_pe():
    inst, pwl = build_pe_regret(gen_synthetic_pe(4, 3, 0.5, 1, seed=6))
    sol = solve_pwl_monolithic(inst, pwl, 2)
    assert -1e-6 <= sol.value <= 2.0 + 1e-6  # utilities lie in [-1, 1]


def test_no_observation_regret_is_static():
    inst, pwl = build_pe_regret(gen_synthetic_pe(4, 2, 0.0, 0, seed=1))
    sol = solve_pwl_monolithic(inst, pwl, 2)
    assert sol.value == pytest.approx(static_pwl_value(inst, pwl), abs=1e-6)


def test_ccg_csv_log(tmp_path):
    inst, pwl = build_pe_regret(gen_synthetic_pe(4, 2, 0.5, 1, seed=0))
    _, state = ccg_solve(inst, pwl, 2, OPTS)
    text = state.to_csv(tmp_path / "log.csv")
    header = text.splitlines()[0].split(",")
    assert header[:3] == ["iter", "LB", "UB"]
    assert len(text.splitlines()) == len(state.iterations) + 1


def test_pwl_requires_matching_shapes():
    inst = gen_random_objective_instance(0)
    with pytest.raises(ValueError):
        PwlObjective(((np.zeros((2, 1)), np.zeros((2, 2)), np.zeros((2, 2))),)).check(inst)
    with pytest.raises(ValueError):
        PwlObjective(())
