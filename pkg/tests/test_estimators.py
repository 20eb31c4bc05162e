import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ddidro import KAdaptabilityRO
from ddidro.instances import (build_observation_cost_instance, build_pe_regret, build_pe_utility,
                              gen_random_multistage_instance, gen_random_objective_instance, gen_synthetic_pe)
from ddidro.kadapt_objective import solve_kadapt_objective
from ddidro.oracles import exact_two_stage_objective, true_worst_case_regret
from ddidro.serialization import save_instance


def test_params_and_clone():
    est = KAdaptabilityRO(K=3, method="objective", eps=1e-3)
    assert est.get_params()["K"] == 3
    c = clone(est)
    assert c.get_params() == est.get_params() and c is not est
    est.set_params(K=1)
    assert est.K == 1


def test_unfitted_estimator_refuses():
    with pytest.raises(NotFittedError):
        KAdaptabilityRO().predict({})


def test_invalid_settings():
    inst = gen_random_objective_instance(0)
    with pytest.raises(ValueError):
        KAdaptabilityRO(method="nope").fit(inst)
    with pytest.raises(ValueError):
        KAdaptabilityRO(K=0).fit(inst)
    with pytest.raises(ValueError):
        KAdaptabilityRO(method="regret-ccg").fit(inst)
    with pytest.raises(TypeError):
        KAdaptabilityRO().fit(42)


def test_method_resolution():
    assert KAdaptabilityRO(K=1).fit(gen_random_objective_instance(0)).method_ == "objective"
    assert KAdaptabilityRO(K=1, eps=1e-4).fit(build_observation_cost_instance()).method_ == "constraint"
    inst, pwl = build_pe_regret(gen_synthetic_pe(3, 2, 0.0, 1, 0))
    assert KAdaptabilityRO(K=1).fit((inst, pwl)).method_ == "regret-ccg"
    assert KAdaptabilityRO(K=1).fit(gen_random_multistage_instance(0)).method_ == "multistage"


def test_fit_from_path_matches_direct_solve(tmp_path):
    inst = gen_random_objective_instance(3)
    save_instance(inst, tmp_path / "i.json")
    est = KAdaptabilityRO(K=2).fit(str(tmp_path / "i.json"))
    assert est.value_ == pytest.approx(solve_kadapt_objective(inst, 2).value, abs=1e-9)
    assert est.status_ == "Optimal"
    assert est.evaluate() == pytest.approx(est.value_, abs=1e-6)


def test_predict_shapes_and_consistency():
    inst = build_pe_utility(gen_synthetic_pe(4, 2, 0.0, 2, seed=1))
    est = KAdaptabilityRO(K=2).fit(inst)
    obs = np.flatnonzero(est.w_ > 0.5)
    one = {int(i): 0.5 for i in obs}
    y = est.predict(one)
    assert y.shape == (4,) and y.sum() == 1
    batch = np.full((3, inst.n_xi), 0.5)
    assert est.predict(batch).shape == (3, 4)
    np.testing.assert_array_equal(est.predict(batch)[0], y)
    assert est.policies_[est.predict_index(one)].tolist() == y.tolist()


def test_true_value_modes():
    inst = build_pe_utility(gen_synthetic_pe(4, 2, 0.0, 1, seed=2))
    est = KAdaptabilityRO(K=2).fit(inst)
    tu = est.evaluate("true-utility")
    assert tu == pytest.approx(exact_two_stage_objective(inst, w_fixed=est.w_), abs=1e-9)
    assert tu >= est.value_ - 1e-6  # full adaptivity can only help (maximize)
    rinst, pwl = build_pe_regret(gen_synthetic_pe(4, 2, 0.0, 1, seed=2))
    r = KAdaptabilityRO(K=2).fit(rinst, pwl=pwl)
    assert r.evaluate("true-regret") == pytest.approx(true_worst_case_regret(rinst, pwl, r.w_), abs=1e-9)
    with pytest.raises(ValueError):
        r.evaluate("sideways")


def test_greedy_and_multistage_attributes():
    g = KAdaptabilityRO(K=3, method="greedy").fit(gen_random_objective_instance(1, n_y=3))
    rounds = g.solution_.info["round_values"]
    assert all(b <= a + 1e-6 for a, b in zip(rounds, rounds[1:]))
    m = KAdaptabilityRO(K=2).fit(gen_random_multistage_instance(2))
    assert m.policy_tree_["T"] == 3 and m.policies_ is None
    with pytest.raises(ValueError):
        m.predict({})
