"""Command-line interface: ``ddidro generate | solve | evaluate | benchmark | elicit``.

Exit codes: 0 the solve ended Optimal (or the command succeeded), 2 the
problem is Infeasible, 3 a node or time limit was reached, 1 usage or data
error.  Machine-readable JSON is written to stdout only with ``--json``.

The environment variables ``DDIDRO_NODE_LIMIT`` and ``DDIDRO_TIME_LIMIT``
provide default node and time caps for every solve.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3

FAMILIES = ("pe-utility", "pe-regret", "rnd", "random-objective", "random-constraint", "random-multistage",
            "observation-cost", "threshold")
METHODS = ("objective", "constraint", "regret-mono", "regret-ccg", "multistage", "greedy")
BENCHMARK_FIELDS = ("family", "I", "J", "Gamma", "Q", "K", "seed", "method", "status", "value", "true_value",
                    "wall_time", "nodes", "ccg_iterations")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ddidro", description="Robust optimization with decision-dependent information discovery.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    g = sub.add_parser("generate", help="write an instance file", description="Generate an instance file.")
    g.add_argument("family", choices=FAMILIES, metavar="FAMILY", help="one of: " + ", ".join(FAMILIES))
    g.add_argument("--items", "-I", dest="I", type=int, default=5, help="items (pe) or projects (rnd)")
    g.add_argument("--features", "-J", dest="J", type=int, default=3, help="features (pe) or risk factors (rnd)")
    g.add_argument("--gamma", type=float, default=0.0, help="answer-noise budget (pe)")
    g.add_argument("--queries", "-Q", dest="Q", type=int, default=1, help="number of queries (pe)")
    g.add_argument("--theta", type=float, default=0.8, help="late-start return fraction (rnd)")
    g.add_argument("--budget", type=float, default=None, help="budget (rnd, default N/2)")
    g.add_argument("--periods", "-T", type=int, default=3, help="number of periods (random-multistage)")
    g.add_argument("--items-csv", default=None, help="item features CSV (pe) instead of random features")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="instance JSON path")
    g.add_argument("--pwl-out", default=None, help="piecewise-linear objective path (pe-regret)")
    g.add_argument("--json", action="store_true", help="print a JSON summary")

    s = sub.add_parser("solve", help="solve an instance", description="Solve an instance file.")
    s.add_argument("--instance", required=True)
    s.add_argument("--method", choices=METHODS, default=None, help="default: chosen from the instance")
    s.add_argument("--K", type=int, default=2, help="number of candidate policies")
    s.add_argument("--eps", type=float, default=None, help="constraint approximation margin")
    s.add_argument("--delta", type=float, default=1e-3, help="CCG optimality tolerance")
    s.add_argument("--big-m", type=float, default=None, help="explicit big-M bound")
    s.add_argument("--no-symmetry", action="store_true", help="disable symmetry breaking")
    s.add_argument("--greedy-base", choices=METHODS[:4], default=None, help="exact method inside greedy rounds")
    s.add_argument("--pwl", default=None, help="piecewise-linear objective (regret methods)")
    s.add_argument("--engine", choices=("highs", "simplex", "bnb"), default="highs")
    s.add_argument("--time-limit", type=float, default=None, help="seconds per MILP")
    s.add_argument("--node-limit", type=int, default=None, help="nodes per MILP")
    s.add_argument("--out", default=None, help="solution JSON path")
    s.add_argument("--tree-out", default=None, help="policy-tree JSON path (multistage)")
    s.add_argument("--ccg-log", default=None, help="CCG iteration CSV path")
    s.add_argument("--lp-out", default=None, help="write the MILP in LP format")
    s.add_argument("--json", action="store_true", help="print the solution as JSON")

    e = sub.add_parser("evaluate", help="evaluate a stored solution", description="Evaluate a stored solution.")
    e.add_argument("--instance", required=True)
    e.add_argument("--solution", required=True)
    e.add_argument("--mode", choices=("lp", "true-utility", "true-regret"), default="lp")
    e.add_argument("--pwl", default=None, help="piecewise-linear objective (regret)")
    e.add_argument("--json", action="store_true")

    b = sub.add_parser("benchmark", help="run a parameter grid", description="Run a parameter grid to CSV.")
    b.add_argument("--family", choices=("pe-utility", "pe-regret", "rnd"), required=True)
    b.add_argument("--I", type=_ints, default=[4], help="comma list, e.g. 4,6")
    b.add_argument("--J", type=_ints, default=[2])
    b.add_argument("--Gamma", type=_floats, default=[0.0])
    b.add_argument("--Q", type=_ints, default=[1])
    b.add_argument("--K", type=_ints, default=[1, 2])
    b.add_argument("--seeds", type=_ints, default=[0], help="comma list or range, e.g. 0-4")
    b.add_argument("--method", choices=METHODS, default=None)
    b.add_argument("--theta", type=float, default=0.8, help="rnd only")
    b.add_argument("--true-value", action="store_true", help="also compute the fully adaptive value")
    b.add_argument("--time-limit", type=float, default=None)
    b.add_argument("--out", required=True, help="CSV path")
    b.add_argument("--json", action="store_true")

    el = sub.add_parser("elicit", help="interactive elicitation", description="Ask the planned queries and "
                        "recommend a policy.")
    el.add_argument("--instance", required=True)
    el.add_argument("--solution", required=True)
    el.add_argument("--answers", default=None, help="file with one answer per line instead of the terminal")
    el.add_argument("--json", action="store_true")
    return p


# ---------------------------------------------------------------------------
# helpers


def _status_code(status: str) -> int:
    return {"Optimal": EXIT_OK, "Infeasible": EXIT_INFEASIBLE, "LimitReached": EXIT_LIMIT}.get(str(status),
                                                                                            EXIT_ERROR)


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def _emit(args, payload: dict, lines: Sequence[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    else:
        for line in lines:
            print(line)


def _vec(v) -> str:
    return " ".join(f"{x:g}" for x in np.asarray(v, float).reshape(-1))


def _load(path: str):
    from .serialization import load_instance

    if not Path(path).is_file():
        raise UsageError(f"no such file: {path}")
    return load_instance(path)


def _load_pwl(path: Optional[str]):
    if path is None:
        return None
    from .serialization import load_pwl

    if not Path(path).is_file():
        raise UsageError(f"no such file: {path}")
    return load_pwl(path)


def _default_pwl_path(out: str) -> str:
    p = Path(out)
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    return str(p.with_name(stem + ".pwl.json"))


def _make_instance(args):
    from . import instances as I

    fam = args.family
    if fam in ("pe-utility", "pe-regret"):
        if args.items_csv:
            Phi, _ = I.load_items_csv(args.items_csv)
            pe = I.PeInstance(Phi, args.gamma, args.Q, metadata=dict(family="pe", source=str(args.items_csv)))
        else:
            pe = I.gen_synthetic_pe(args.I, args.J, args.gamma, args.Q, args.seed)
        if fam == "pe-utility":
            return I.build_pe_utility(pe), None
        return I.build_pe_regret(pe)
    if fam == "rnd":
        B = args.budget if args.budget is not None else args.I / 2.0
        return I.build_rnd_portfolio(args.I, args.J, args.theta, B, seed=args.seed), None
    if fam == "random-objective":
        return I.gen_random_objective_instance(args.seed), None
    if fam == "random-constraint":
        return I.gen_random_constraint_instance(args.seed), None
    if fam == "random-multistage":
        return I.gen_random_multistage_instance(args.seed, T=args.periods), None
    if fam == "observation-cost":
        return I.build_observation_cost_instance(), None
    return I.build_threshold_instance(), None


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    from .serialization import save_instance, save_pwl

    inst, pwl = _make_instance(args)
    save_instance(inst, args.out)
    pwl_path = None
    if pwl is not None:
        pwl_path = args.pwl_out or _default_pwl_path(args.out)
        save_pwl(pwl, pwl_path)
    from .multistage import MultistageInstance

    if isinstance(inst, MultistageInstance):
        payload = dict(family=args.family, instance=str(args.out), pwl=None, name=inst.name, T=inst.T,
                       n_xi=inst.n_xi, n_y=[inst.n_y(t) for t in range(inst.T)], L=inst.L, sense=inst.sense)
        lines = [f"wrote {args.out} ({inst.name}: T={inst.T} n_xi={inst.n_xi} L={inst.L}, {inst.sense})"]
        _emit(args, payload, lines)
        return EXIT_OK
    payload = dict(family=args.family, instance=str(args.out), pwl=pwl_path, name=inst.name, n_x=inst.n_x,
                   n_xi=inst.n_xi, n_y=inst.n_y, L=inst.L, rhs_mode=inst.rhs_mode, sense=inst.sense)
    lines = [f"wrote {args.out} ({inst.name}: n_x={inst.n_x} n_xi={inst.n_xi} n_y={inst.n_y} L={inst.L}, "
             f"{inst.rhs_mode} right-hand side, {inst.sense})"]
    if pwl_path:
        lines.append(f"wrote {pwl_path} ({pwl.n_pieces} pieces)")
    _emit(args, payload, lines)
    return EXIT_OK


def _export_lp(inst, method, K, opts, pwl, path):
    from .milp.lpfile import export_lp_file
    from .multistage import MultistageInstance, build_multistage_kadapt, multistage_from_two_stage

    if method == "multistage":
        ms = inst if isinstance(inst, MultistageInstance) else multistage_from_two_stage(inst)
        m = build_multistage_kadapt(ms.canonical(), K, opts)
    elif method == "constraint" or (method == "greedy" and inst.rhs_mode == "uncertain"):
        from .core import canonicalize
        from .kadapt_constraint import build_kadapt_constraint_mblp

        m = build_kadapt_constraint_mblp(canonicalize(inst), K, opts)
    elif method in ("regret-mono", "regret-ccg"):
        from .pwl import build_pwl_monolithic

        m = build_pwl_monolithic(inst, pwl, K, opts)
    else:
        from .kadapt_objective import build_kadapt_objective_mblp

        m = build_kadapt_objective_mblp(inst, K, opts)
    export_lp_file(m, path)


def cmd_solve(args) -> int:
    from .estimators import KAdaptabilityRO
    from .serialization import save_solution, solution_to_dict

    inst = _load(args.instance)
    pwl = _load_pwl(args.pwl)
    est = KAdaptabilityRO(K=args.K, method=args.method, eps=args.eps, delta=args.delta, big_M=args.big_m,
                          symmetry_breaking=False if args.no_symmetry else None, greedy_base=args.greedy_base,
                          engine=args.engine, time_limit=args.time_limit, node_limit=args.node_limit)
    t0 = time.perf_counter()
    est.fit(inst, pwl=pwl)
    wall = time.perf_counter() - t0
    sol = est.solution_
    if args.lp_out:
        _export_lp(inst, est.method_, args.K, est.solver_options(), pwl, args.lp_out)
    if est.method_ == "multistage":
        payload = sol.policy_tree()
        payload.update(method="multistage", wall_time=wall)
        if args.out or args.tree_out:
            for path in {args.out, args.tree_out} - {None}:
                sol.to_json(path)
        lines = [f"status   {sol.status}", f"value    {sol.value:.10g}", f"method   multistage (T={sol.T}, K={sol.K})"]
        _emit(args, payload, lines)
        return _status_code(sol.status)
    if args.out:
        save_solution(sol, args.out)
    if args.ccg_log and est.ccg_state_ is not None:
        est.ccg_state_.to_csv(args.ccg_log)
    payload = solution_to_dict(sol)
    payload["wall_time"] = wall
    if est.ccg_state_ is not None:
        payload["ccg"] = est.ccg_state_.csv_rows()
    lines = [f"status   {sol.status}", f"value    {sol.value:.10g}", f"method   {sol.method} (K={sol.K})"]
    if sol.w is not None:
        if inst.n_x:
            lines.append(f"x        {_vec(sol.x)}")
        lines.append(f"w        {_vec(sol.w)}")
        for k, y in enumerate(np.atleast_2d(sol.policies)):
            lines.append(f"y[{k + 1}]     {_vec(y)}")
    lines.append(f"time     {wall:.3f} s")
    _emit(args, payload, lines)
    return _status_code(sol.status)


def cmd_evaluate(args) -> int:
    from .evaluation import evaluate_solution
    from .multistage import MultistageInstance

    inst = _load(args.instance)
    if isinstance(inst, MultistageInstance):
        raise UsageError("evaluate takes two-stage instances; multi-stage trees are evaluated at solve time")
    from .serialization import SchemaError, load_solution

    if not Path(args.solution).is_file():
        raise UsageError(f"no such file: {args.solution}")
    try:
        sol = load_solution(args.solution)
    except (KeyError, json.JSONDecodeError) as exc:
        raise SchemaError(f"malformed solution file: {exc}") from exc
    pwl = _load_pwl(args.pwl)
    value = evaluate_solution(inst, sol, args.mode, pwl=pwl)
    code = EXIT_INFEASIBLE if math.isinf(value) else EXIT_OK
    _emit(args, dict(mode=args.mode, value=_num(value), stored_value=_num(sol.value)),
          [f"{args.mode} value {value:.10g} (stored {sol.value:.10g})"])
    return code


def _benchmark_rows(args):
    from . import instances as I
    from .estimators import KAdaptabilityRO
    from .evaluation import evaluate_solution

    fam = args.family
    grid = [(i, j, g, q, k, s) for i in args.I for j in args.J for g in args.Gamma for q in args.Q
            for k in args.K for s in args.seeds]
    for (i, j, g, q, k, s) in grid:
        pwl = None
        if fam == "rnd":
            inst = I.build_rnd_portfolio(i, j, args.theta, i / 2.0, seed=s)
        else:
            pe = I.gen_synthetic_pe(i, j, g, min(q, i), s)
            if fam == "pe-utility":
                inst = I.build_pe_utility(pe)
            else:
                inst, pwl = I.build_pe_regret(pe)
        est = KAdaptabilityRO(K=k, method=args.method, time_limit=args.time_limit)
        t0 = time.perf_counter()
        est.fit(inst, pwl=pwl)
        wall = time.perf_counter() - t0
        sol = est.solution_
        true_value = None
        if args.true_value and sol.w is not None and fam != "rnd":
            mode = "true-regret" if pwl is not None else "true-utility"
            true_value = evaluate_solution(inst, sol, mode, pwl=pwl)
        yield dict(family=fam, I=i, J=j, Gamma=g, Q=q, K=k, seed=s, method=est.method_, status=sol.status,
                   value=_num(sol.value), true_value=_num(true_value), wall_time=round(wall, 6),
                   nodes=sol.info.get("nodes"),
                   ccg_iterations=None if est.ccg_state_ is None else len(est.ccg_state_.iterations))


def cmd_benchmark(args) -> int:
    rows = []
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCHMARK_FIELDS)
        writer.writeheader()
        for row in _benchmark_rows(args):
            writer.writerow(row)
            fh.flush()
            rows.append(row)
            if not args.json:
                print(f"{row['family']} I={row['I']} J={row['J']} Gamma={row['Gamma']} Q={row['Q']} K={row['K']} "
                      f"seed={row['seed']}: {row['status']} {row['value']} ({row['wall_time']:.2f} s)")
    if args.json:
        print(json.dumps(dict(out=str(args.out), rows=rows), indent=2))
    else:
        print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _coordinate_range(inst, fixed: dict, i: int):
    from .milp import INF, LinExpr, MilpModel, solve_lp

    out = []
    for sign in (1.0, -1.0):
        m = MilpModel("range")
        xi = m.add_vars("xi", inst.n_xi, -INF, INF)
        for r in range(inst.xi.n_rows):
            m.add_constr(LinExpr().add_dot(xi, inst.xi.A[r]), "<=", float(inst.xi.b[r]))
        for j, v in fixed.items():
            m.add_constr({int(xi[j]): 1.0}, "==", float(v))
        m.set_objective({int(xi[i]): sign})
        res = solve_lp(m)
        if res.status != "Optimal":
            return None
        out.append(sign * res.value)
    return out[0], out[1]


def cmd_elicit(args, stdin=None) -> int:
    from .kadapt_objective import select_recourse_policy
    from .serialization import load_solution

    inst = _load(args.instance)
    if not Path(args.solution).is_file():
        raise UsageError(f"no such file: {args.solution}")
    sol = load_solution(args.solution)
    if sol.w is None or sol.policies is None:
        raise UsageError(f"the solution has no decisions (status {sol.status})")
    source = open(args.answers, encoding="utf-8") if args.answers else (stdin or sys.stdin)
    out = sys.stderr if args.json else sys.stdout
    is_pe = str(inst.metadata.get("family", "")) == "pe" or inst.name.startswith("pe-")
    answers: dict = {}
    try:
        for i in np.flatnonzero(np.asarray(sol.w) > 0.5):
            i = int(i)
            lo, hi = _coordinate_range(inst, answers, i)
            if is_pe:
                question = f"On a scale from 0 to 1, how much do you value item {i + 1}? "
            else:
                question = f"Observed value of parameter {i + 1}? "
            while True:
                print(question, end="", file=out, flush=True)
                line = source.readline()
                if not line:
                    raise UsageError("input ended before every query was answered")
                if args.answers:
                    print(line.strip(), file=out)
                try:
                    v = float(line.strip())
                except ValueError:
                    print(f"  not a number: {line.strip()!r}", file=out)
                    continue
                if is_pe and not 0.0 <= v <= 1.0:
                    print("  the answer must lie in [0, 1]", file=out)
                    continue
                if not lo - 1e-9 <= v <= hi + 1e-9:
                    print(f"  inconsistent with earlier answers; feasible range is [{lo:.6g}, {hi:.6g}]", file=out)
                    continue
                answers[i] = v
                break
    finally:
        if args.answers:
            source.close()
    k = select_recourse_policy(inst, sol, answers)
    y = np.asarray(sol.policies)[k]
    items = [int(j) + 1 for j in np.flatnonzero(y > 0.5)]
    payload = dict(answers={str(i + 1): v for i, v in answers.items()}, policy_index=k + 1,
                   policy=y.tolist(), recommended=items)
    if is_pe and len(items) == 1:
        line = f"recommended item: {items[0]}"
    else:
        line = f"implement policy {k + 1}: {_vec(y)}"
    _emit(args, payload, [line])
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "evaluate": cmd_evaluate, "benchmark": cmd_benchmark,
            "elicit": cmd_elicit}


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .serialization import SchemaError
    from .validation import InstanceError

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SchemaError, InstanceError, FileNotFoundError, ValueError, TypeError) as exc:
        print(f"ddidro {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
