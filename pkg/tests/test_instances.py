import hashlib

import numpy as np
import pytest
from scipy.optimize import linprog

from ddidro.core import SolverOptions, validate_instance
from ddidro.instances import (PeInstance, build_observation_cost_instance, build_pe_regret, build_pe_utility,
                              build_rnd_portfolio, build_threshold_instance, gen_random_constraint_instance,
                              gen_random_multistage_instance, gen_random_objective_instance, gen_synthetic_pe,
                              load_items_csv, pe_uncertainty_set)
from ddidro.kadapt_constraint import solve_kadapt_constraint
from ddidro.kadapt_objective import solve_kadapt_objective

OPTS = SolverOptions(eps_feasibility=1e-4)


def test_synthetic_features_are_reproducible():
    pe = gen_synthetic_pe(10, 10, 0.0, 1, seed=42)
    digest = hashlib.sha256(pe.Phi.tobytes()).hexdigest()
    assert digest == "d0a51a78f0ac67faed41426d04c5a4e33a5a653d1cb4b49b0028f0a70a546a4a"
    assert pe.Phi.shape == (10, 10)
    assert pe.rho == pytest.approx(np.abs(pe.Phi).sum(axis=1).max(), rel=1e-15)
    with pytest.raises(ValueError):
        PeInstance(pe.Phi, rho=pe.rho + 1.0)


def test_single_item_worst_utility_is_zero():
    inst = build_pe_utility(gen_synthetic_pe(1, 3, 0.0, 0, seed=0))
    assert solve_kadapt_objective(inst, 1).value == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("seed", range(3))
def test_some_item_reaches_unit_utility(seed):
    xi = pe_uncertainty_set(gen_synthetic_pe(5, 3, 0.0, 1, seed))
    best = max(-linprog(-np.eye(xi.dim)[i], A_ub=xi.A, b_ub=xi.b, bounds=(None, None)).fun for i in range(5))
    assert best == pytest.approx(1.0, abs=1e-6)


def test_full_information_pe_value():
    pe = gen_synthetic_pe(3, 2, 0.0, 3, seed=1)
    inst = build_pe_utility(pe)
    xi = inst.xi
    n = xi.dim
    A_ub = np.vstack([np.c_[xi.A, np.zeros(len(xi.b))], np.c_[np.eye(n)[:3], -np.ones(3)]])
    full = linprog(np.r_[np.zeros(n), 1.0], A_ub=A_ub, b_ub=np.r_[xi.b, np.zeros(3)], bounds=(None, None)).fun
    assert solve_kadapt_objective(inst, 3).value == pytest.approx(full, abs=1e-6)


def test_pe_regret_piece_count():
    inst, pwl = build_pe_regret(gen_synthetic_pe(5, 2, 0.0, 1, seed=0))
    assert pwl.n_pieces == 5 and inst.sense == "minimize"


def test_rnd_full_budget_invests_now():
    N, M = 3, 2
    rng = np.random.default_rng(4)
    r0, c0 = rng.uniform(0.5, 1.5, N), rng.uniform(0.5, 1.5, N)
    Phi, Psi = rng.uniform(-1, 1, (N, M)) / M, rng.uniform(-1, 1, (N, M)) / M
    inst = build_rnd_portfolio(N, M, 1.0, B=10.0 * c0.sum(), r0=r0, c0=c0, Phi=Phi, Psi=Psi)
    # worst case of sum_i r0_i (1 + Phi_i . zeta / 2) over the unit box
    worst_total = r0.sum() - 0.5 * np.abs(r0 @ Phi).sum()
    sol = solve_kadapt_constraint(inst, 1, OPTS)
    assert sol.value == pytest.approx(worst_total, abs=1e-5)
    assert np.all(sol.w[:N] + sol.policies[0] == 1)


@pytest.mark.parametrize("c0,B,expected", [(0.8, 1.0, 1.2), (1.3, 1.0, 0.0)])
def test_rnd_deterministic_single_project(c0, B, expected):
    inst = build_rnd_portfolio(1, 1, 0.5, B, r0=[1.2], c0=[c0], Phi=[[0.0]], Psi=[[0.0]])
    assert solve_kadapt_constraint(inst, 1, OPTS).value == pytest.approx(expected, abs=1e-5)


def test_rnd_more_policies_help():
    inst = build_rnd_portfolio(3, 2, 0.8, 1.5, seed=1)
    v1 = solve_kadapt_constraint(inst, 1, OPTS).value
    v2 = solve_kadapt_constraint(inst, 2, OPTS).value
    assert v2 >= v1 - 1e-6


def test_rnd_rejects_bad_parameters():
    with pytest.raises(ValueError):
        build_rnd_portfolio(2, 1, 0.0, 1.0)
    with pytest.raises(ValueError):
        build_rnd_portfolio(2, 1, 0.5, -1.0)


@pytest.mark.parametrize("make", [
    lambda: build_pe_utility(gen_synthetic_pe(4, 3, 0.5, 2, 0)),
    lambda: build_pe_regret(gen_synthetic_pe(4, 3, 0.5, 2, 0))[0],
    lambda: build_rnd_portfolio(3, 2, 0.8, 1.5, seed=0),
    build_observation_cost_instance,
    build_threshold_instance,
    lambda: gen_random_objective_instance(0),
    lambda: gen_random_constraint_instance(0),
])
def test_generated_instances_validate(make):
    assert validate_instance(make()) == []


def test_multistage_generator_shape():
    ms = gen_random_multistage_instance(3, T=4)
    assert ms.T == 4 and ms.n_xi == 3
    assert not ms.xi.observable_mask[-1]


def test_items_csv(tmp_path):
    p = tmp_path / "items.csv"
    p.write_text("a,b\n2,-4\n-1,2\n")
    X, names = load_items_csv(p)
    assert names == ["a", "b"]
    np.testing.assert_array_equal(X, [[1.0, -1.0], [-0.5, 0.5]])
    assert np.all(np.abs(X).max(axis=0) == 1.0)
    z = tmp_path / "zero.csv"
    z.write_text("a,b\n0,1\n0,-3\n")
    with pytest.warns(RuntimeWarning, match="all zero"):
        Xz, _ = load_items_csv(z)
    np.testing.assert_array_equal(Xz[:, 0], [0.0, 0.0])
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1\n")
    with pytest.raises(ValueError, match="expected 2 fields"):
        load_items_csv(bad)
