import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddidro.core import BinaryFeasibleSet, DdidInstance, UncertaintySet
from ddidro.instances import (build_observation_cost_instance, build_pe_regret, build_pe_utility,
                              build_rnd_portfolio, build_threshold_instance, gen_random_constraint_instance,
                              gen_random_objective_instance, gen_synthetic_pe)
from ddidro.multistage import multistage_from_two_stage
from ddidro.serialization import (SCHEMA, SchemaError, dumps, dumps_instance, instance_from_dict, load_instance,
                                  load_pwl, load_solution, loads_instance, multistage_to_dict, save_instance,
                                  save_pwl, save_solution)
from ddidro.kadapt_objective import solve_kadapt_objective

FAMILY_INSTANCES = [
    lambda: build_pe_utility(gen_synthetic_pe(4, 2, 0.1, 2, 0)),
    lambda: build_pe_regret(gen_synthetic_pe(3, 2, 0.0, 1, 1))[0],
    lambda: build_rnd_portfolio(3, 2, 0.8, 1.5, seed=1),
    build_observation_cost_instance,
    build_threshold_instance,
    lambda: gen_random_objective_instance(5),
    lambda: gen_random_constraint_instance(3),
]


@pytest.mark.parametrize("make", FAMILY_INSTANCES)
def test_round_trip_is_bit_exact(make, tmp_path):
    inst = make()
    text = dumps_instance(inst)
    assert json.loads(text)["schema"] == SCHEMA
    back = loads_instance(text)
    assert dumps_instance(back) == text
    for nm in ("C", "D", "Qm", "T", "V", "Wrec"):
        np.testing.assert_array_equal(getattr(back, nm), getattr(inst, nm))
    path = tmp_path / "i.json"
    save_instance(inst, path)
    assert path.read_text() == text
    assert dumps_instance(load_instance(path)) == text


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=6, max_size=6), st.lists(finite, min_size=4, max_size=4))
def test_arbitrary_floats_survive(vals, qs):
    xi = UncertaintySet.box([-1.0, -2.0], [1.0, 3.0])
    inst = DdidInstance.build(xi, n_x=1, n_y=2, C=np.array(vals[:2]).reshape(2, 1),
                              D=np.array(vals[2:6]).reshape(2, 2), Qm=np.array(qs).reshape(2, 2),
                              setY=BinaryFeasibleSet.unit_simplex(2))
    text = dumps_instance(inst)
    back = loads_instance(text)
    assert dumps_instance(back) == text
    assert np.array_equal(back.D, inst.D) and np.array_equal(back.Qm, inst.Qm)


def test_schema_mismatch_rejected():
    d = json.loads(dumps_instance(gen_random_objective_instance(0)))
    d["schema"] = "other"
    with pytest.raises(SchemaError):
        instance_from_dict(d)
    d["schema"] = SCHEMA
    d["C"] = [[1.0, 2.0, 3.0]]
    with pytest.raises(SchemaError):
        instance_from_dict(d)


def test_multistage_round_trip():
    ms = multistage_from_two_stage(gen_random_objective_instance(2))
    text = dumps(multistage_to_dict(ms))
    assert dumps(multistage_to_dict(loads_instance(text))) == text


def test_pwl_and_solution_files(tmp_path):
    inst, pwl = build_pe_regret(gen_synthetic_pe(3, 2, 0.0, 1, 0))
    save_pwl(pwl, tmp_path / "p.json")
    back = load_pwl(tmp_path / "p.json")
    assert all(np.array_equal(a, b) for pa, pb in zip(pwl.pieces, back.pieces) for a, b in zip(pa, pb))
    sol = solve_kadapt_objective(gen_random_objective_instance(1), 2)
    save_solution(sol, tmp_path / "s.json")
    s2 = load_solution(tmp_path / "s.json")
    assert s2.value == sol.value and np.array_equal(s2.w, sol.w) and np.array_equal(s2.policies, sol.policies)
