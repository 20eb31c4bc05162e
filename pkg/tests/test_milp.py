import itertools
import math

import highspy
import numpy as np
import pytest

from ddidro.core import SolverOptions
from ddidro.milp import INF, LinExpr, MilpModel, add_product_bin_cont, export_lp_file, format_lp, solve_lp, solve_milp
from ddidro.milp.simplex import simplex_solve

ENGINES = ["highs", "simplex"]


def vertex_enumeration_lp(c, A, b):
    """Minimize c x over {A x = b, x >= 0} by enumerating every basis."""
    m, n = A.shape
    best = math.inf
    for basis in itertools.combinations(range(n), m):
        B = A[:, basis]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        xB = np.linalg.solve(B, b)
        if np.any(xB < -1e-9):
            continue
        x = np.zeros(n)
        x[list(basis)] = xB
        best = min(best, float(c @ x))
    return best


@pytest.mark.parametrize("engine", ENGINES)
def test_one_variable_lp_and_active_dual(engine):
    m = MilpModel()
    x = m.add_var("x", -INF, INF)
    m.add_constr({x: 1.0}, ">=", 3.0)
    m.add_constr({x: 1.0}, "<=", 10.0)
    m.set_objective({x: 1.0})
    sol = solve_lp(m, engine=engine)
    assert str(sol.status) == "Optimal"
    assert sol.value == pytest.approx(3.0, abs=1e-9)
    assert sol.duals[0] == pytest.approx(1.0, abs=1e-9)
    assert sol.duals[1] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("engine", ENGINES)
def test_box_maximum(engine):
    # max over [-1, 1] x [-1.1, 1] of -(xi1 + xi2) is 2.1
    m = MilpModel()
    xi = m.add_vars("xi", 2, -INF, INF)
    for i, (lo, hi) in enumerate([(-1.0, 1.0), (-1.1, 1.0)]):
        m.add_constr({int(xi[i]): 1.0}, "<=", hi)
        m.add_constr({int(xi[i]): 1.0}, ">=", lo)
    m.set_objective(LinExpr().add_dot(xi, [1.0, 1.0]))
    assert -solve_lp(m, engine=engine).value == pytest.approx(2.1, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_random_standard_form_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (8, 12))
    x0 = rng.uniform(0.1, 1.0, 12)
    b = A @ x0
    c = rng.uniform(0.1, 1.0, 12)  # positive costs on x >= 0 keep the LP bounded
    expected = vertex_enumeration_lp(c, A, b)
    for engine in ENGINES:
        m = MilpModel()
        x = m.add_vars("x", 12, 0.0, INF)
        for r in range(8):
            m.add_constr(LinExpr().add_dot(x, A[r]), "==", float(b[r]))
        m.set_objective(LinExpr().add_dot(x, c))
        sol = solve_lp(m, engine=engine)
        assert sol.value == pytest.approx(expected, rel=1e-7, abs=1e-7)
        assert sol.duality_gap <= 1e-7 * (1 + abs(sol.value))


def test_simplex_infeasible_and_unbounded():
    A = np.array([[1.0], [1.0]])
    res = simplex_solve(np.array([1.0]), A, np.array([2.0, -INF]), np.array([INF, 1.0]), np.array([-INF]),
                        np.array([INF]))
    assert res.status == "Infeasible"
    res = simplex_solve(np.array([-1.0]), np.zeros((0, 1)), np.zeros(0), np.zeros(0), np.array([0.0]),
                        np.array([INF]))
    assert res.status == "Unbounded"


@pytest.mark.parametrize("engine", ENGINES)
def test_knapsack(engine):
    m = MilpModel()
    a, b = m.add_var("a", binary=True), m.add_var("b", binary=True)
    m.add_constr({a: 1.0, b: 1.0}, "<=", 1.0)
    m.set_objective({a: -3.0, b: -2.0})
    sol = solve_milp(m, engine=engine)
    assert -sol.value == pytest.approx(3.0)
    assert sol.primal[a] == 1.0 and sol.primal[b] == 0.0


@pytest.mark.parametrize("engine", ENGINES)
def test_contradictory_binaries_infeasible(engine):
    m = MilpModel()
    a = m.add_var("a", binary=True)
    m.add_constr({a: 1.0}, ">=", 1.0)
    m.add_constr({a: 1.0}, "<=", 0.0)
    m.set_objective({a: 1.0})
    assert str(solve_milp(m, engine=engine).status) == "Infeasible"


def _random_milp(seed, n_bin=8, n_cont=4, rows=6):
    rng = np.random.default_rng(seed)
    m = MilpModel(f"rand{seed}")
    z = m.add_vars("z", n_bin, binary=True)
    c = m.add_vars("c", n_cont, -5.0, 5.0)
    for _ in range(rows):
        e = LinExpr().add_dot(z, rng.integers(-3, 4, n_bin)).add_dot(c, rng.uniform(-1, 1, n_cont))
        m.add_constr(e, "<=", float(rng.integers(1, 5)))
    m.set_objective(LinExpr().add_dot(z, rng.integers(-5, 5, n_bin)).add_dot(c, rng.uniform(-1, 1, n_cont)))
    return m


@pytest.mark.parametrize("seed", range(6))
def test_bnb_matches_highs_and_is_deterministic(seed):
    m = _random_milp(seed)
    ref = solve_milp(m, engine="highs")
    a = solve_milp(m, engine="bnb")
    b = solve_milp(m, engine="bnb")
    assert a.value == pytest.approx(ref.value, abs=1e-7)
    assert a.status == b.status and a.nodes == b.nodes
    assert np.array_equal(a.primal, b.primal)  # bit-identical reruns


def test_bnb_incumbent_trace_monotone():
    from ddidro.milp.bnb import branch_and_bound

    m = _random_milp(3, n_bin=10)
    c, A, lo, hi, lb, ub, integ, _ = m.to_arrays()
    res = branch_and_bound(c, A, lo, hi, lb, ub, integ)
    trace = [v for _, v in res.incumbent_trace] if res.incumbent_trace and isinstance(
        res.incumbent_trace[0], tuple) else list(res.incumbent_trace)
    assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))


def test_node_limit_reports_limit():
    m = _random_milp(1, n_bin=14, rows=8)
    sol = solve_milp(m, SolverOptions(node_limit=1), engine="bnb")
    assert str(sol.status) in ("LimitReached", "Optimal")


@pytest.mark.parametrize("z_val,c_val,expected", [(1.0, 0.7, 0.7), (0.0, 0.7, 0.0), (0.0, -3.0, 0.0)])
def test_product_helper_is_exact(z_val, c_val, expected):
    M = 10.0
    m = MilpModel()
    z = m.add_var("z", binary=True)
    c = m.add_var("c", -M, M)
    p = add_product_bin_cont(m, z, c, -M, M)
    m.fix(z, z_val)
    m.fix(c, c_val)
    for sense in (1.0, -1.0):
        m.set_objective({p: sense})
        assert solve_milp(m).value * sense == pytest.approx(expected, abs=1e-9)
    assert m.n_rows == 4


def test_product_helper_rejects_infinite_bounds():
    m = MilpModel()
    z = m.add_var("z", binary=True)
    c = m.add_var("c", -INF, INF)
    with pytest.raises(ValueError):
        add_product_bin_cont(m, z, c, -INF, 1.0)


def test_lp_strong_duality_on_random_feasible_lps():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = MilpModel()
        x = m.add_vars("x", 5, -2.0, 2.0)
        for _ in range(4):
            m.add_constr(LinExpr().add_dot(x, rng.uniform(-1, 1, 5)), "<=", float(rng.uniform(0, 1)))
        m.set_objective(LinExpr().add_dot(x, rng.uniform(-1, 1, 5)))
        for engine in ENGINES:
            sol = solve_lp(m, engine=engine)
            assert str(sol.status) == "Optimal"
            assert sol.duality_gap <= 1e-9 * (1 + abs(sol.value)) + 1e-9


def test_lp_file_golden_one_variable(tmp_path):
    m = MilpModel("one")
    x = m.add_var("x", 0.0, 4.0)
    m.add_constr({x: 2.0}, ">=", 1.0, name="low")
    m.set_objective({x: 1.5})
    golden = (tmp_path / "g.lp")
    export_lp_file(m, golden)
    from pathlib import Path

    expected = (Path(__file__).parent / "golden" / "one_var.lp").read_text()
    assert golden.read_text() == expected


def test_lp_file_empty_objective():
    m = MilpModel("empty")
    x = m.add_var("x", 0.0, 1.0)
    m.add_constr({x: 1.0}, "<=", 1.0)
    assert " obj: 0" in format_lp(m).splitlines()


def test_lp_file_reimports_in_highs_with_same_optimum(tmp_path):
    from ddidro.instances import gen_random_objective_instance
    from ddidro.kadapt_objective import build_kadapt_objective_mblp

    inst = gen_random_objective_instance(4)
    m = build_kadapt_objective_mblp(inst, 2, SolverOptions())
    path = tmp_path / "model.lp"
    export_lp_file(m, path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    h.run()
    assert h.getInfo().objective_function_value == pytest.approx(solve_milp(m).value, abs=1e-6)


def test_lp_export_deterministic():
    m = _random_milp(2)
    assert format_lp(m) == format_lp(m.copy())
