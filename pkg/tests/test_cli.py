import csv
import json
from pathlib import Path

import pytest

from ddidro.cli import BENCHMARK_FIELDS, main

GOLDEN = Path(__file__).parent / "golden"


@pytest.mark.parametrize("command", ["main", "generate", "solve", "evaluate", "benchmark", "elicit"])
def test_help_matches_golden(command, capsys, monkeypatch):
    monkeypatch.setenv("COLUMNS", "80")
    argv = ["--help"] if command == "main" else [command, "--help"]
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 0
    assert capsys.readouterr().out == (GOLDEN / f"help_{command}.txt").read_text()


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_generate_solve_evaluate_pipeline(tmp_path, capsys):
    inst = tmp_path / "pe.json"
    code, out, _ = _run(["generate", "pe-utility", "-I", 4, "-J", 2, "-Q", 1, "--seed", 3, "--out", inst], capsys)
    assert code == 0 and out.startswith("wrote ")
    sol = tmp_path / "sol.json"
    code, out, _ = _run(["solve", "--instance", inst, "--K", 2, "--out", sol, "--json"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["status"] == "Optimal" and payload["schema"] == "ddid-solution-v1"
    code, out, _ = _run(["evaluate", "--instance", inst, "--solution", sol, "--json"], capsys)
    ev = json.loads(out)
    assert ev["value"] == pytest.approx(payload["value"], abs=1e-6)
    code, out, _ = _run(["evaluate", "--instance", inst, "--solution", sol, "--mode", "true-utility"], capsys)
    assert code == 0 and out.startswith("true-utility value")


def test_plain_output_is_not_json(tmp_path, capsys):
    inst = tmp_path / "r.json"
    _run(["generate", "random-objective", "--out", inst], capsys)
    code, out, _ = _run(["solve", "--instance", inst, "--K", 1], capsys)
    assert code == 0
    with pytest.raises(json.JSONDecodeError):
        json.loads(out)
    assert out.splitlines()[0].split() == ["status", "Optimal"]


def test_exit_codes(tmp_path, capsys):
    th = tmp_path / "th.json"
    _run(["generate", "threshold", "--out", th], capsys)
    assert _run(["solve", "--instance", th, "--K", 2], capsys)[0] == 2
    rc = tmp_path / "rc.json"
    _run(["generate", "random-constraint", "--seed", 0, "--out", rc], capsys)
    assert _run(["solve", "--instance", rc, "--K", 2, "--node-limit", 1], capsys)[0] == 3
    code, _, err = _run(["solve", "--instance", tmp_path / "missing.json"], capsys)
    assert code == 1 and "no such file" in err
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["generate", "no-such-family", "--out", "x"])
    assert exc.value.code == 1
    assert main([]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": "other"}')
    code, _, err = _run(["solve", "--instance", bad], capsys)
    assert code == 1 and "schema" in err


def test_regret_outputs(tmp_path, capsys):
    inst = tmp_path / "reg.json"
    code, out, _ = _run(["generate", "pe-regret", "-I", 4, "-J", 2, "--out", inst, "--json"], capsys)
    info = json.loads(out)
    pwl = info["pwl"]
    assert Path(pwl).is_file()
    log, sol, lp = tmp_path / "ccg.csv", tmp_path / "s.json", tmp_path / "m.lp"
    code, out, _ = _run(["solve", "--instance", inst, "--pwl", pwl, "--method", "regret-ccg", "--K", 2,
                         "--ccg-log", log, "--out", sol, "--lp-out", lp], capsys)
    assert code == 0
    rows = list(csv.DictReader(log.open()))
    assert rows and float(rows[-1]["UB"]) - float(rows[-1]["LB"]) <= 1e-3 + 1e-9
    assert lp.read_text().startswith("\\") or "Minimize" in lp.read_text()
    code, out, _ = _run(["evaluate", "--instance", inst, "--solution", sol, "--pwl", pwl, "--mode", "true-regret",
                         "--json"], capsys)
    assert code == 0 and json.loads(out)["value"] >= -1e-9


def test_multistage_tree(tmp_path, capsys):
    inst = tmp_path / "ms.json"
    _run(["generate", "random-multistage", "--seed", 2, "-T", 2, "--out", inst], capsys)
    tree = tmp_path / "tree.json"
    code, out, _ = _run(["solve", "--instance", inst, "--K", 2, "--tree-out", tree], capsys)
    assert code == 0
    t = json.loads(tree.read_text())
    assert t["T"] == 2 and set(t["tree"]) == {"1", "2"}


def test_benchmark_csv(tmp_path, capsys):
    out_csv = tmp_path / "bench.csv"
    code, out, _ = _run(["benchmark", "--family", "pe-regret", "--I", 3, "--K", "1,2", "--seeds", "0-1",
                         "--true-value", "--out", out_csv, "--json"], capsys)
    assert code == 0
    assert json.loads(out)["out"] == str(out_csv)
    with out_csv.open() as fh:
        reader = csv.DictReader(fh)
        assert tuple(reader.fieldnames) == BENCHMARK_FIELDS
        rows = list(reader)
    assert len(rows) == 4
    for r in rows:
        assert r["status"] == "Optimal"
        assert float(r["true_value"]) <= float(r["value"]) + 1e-6
        assert int(r["ccg_iterations"]) >= 1


def _pe_solution(tmp_path, capsys, Q):
    inst, sol = tmp_path / f"pe{Q}.json", tmp_path / f"pe{Q}.sol.json"
    _run(["generate", "pe-utility", "-I", 4, "-J", 2, "-Q", Q, "--seed", 1, "--out", inst], capsys)
    _run(["solve", "--instance", inst, "--K", 2, "--out", sol], capsys)
    return inst, sol


def test_elicit_scripted_with_reprompt(tmp_path, capsys):
    inst, sol = _pe_solution(tmp_path, capsys, 1)
    answers = tmp_path / "answers.txt"
    answers.write_text("abc\n1.5\n0.4\n")
    code, out, _ = _run(["elicit", "--instance", inst, "--solution", sol, "--answers", answers], capsys)
    assert code == 0
    assert "how much do you value item" in out
    assert "not a number" in out and "must lie in [0, 1]" in out
    assert out.strip().splitlines()[-1].startswith("recommended item: ")


def test_elicit_terminal_and_json(tmp_path, capsys, monkeypatch):
    import io

    inst, sol = _pe_solution(tmp_path, capsys, 1)
    monkeypatch.setattr("sys.stdin", io.StringIO("0.7\n"))
    code, out, err = _run(["elicit", "--instance", inst, "--solution", sol, "--json"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert list(payload["answers"].values()) == [0.7] and len(payload["recommended"]) == 1
    assert "how much do you value" in err
    monkeypatch.setattr("sys.stdin", io.StringIO(""))
    assert _run(["elicit", "--instance", inst, "--solution", sol], capsys)[0] == 1


def test_elicit_without_queries_recommends_immediately(tmp_path, capsys):
    inst, sol = _pe_solution(tmp_path, capsys, 0)
    empty = tmp_path / "none.txt"
    empty.write_text("")
    code, out, _ = _run(["elicit", "--instance", inst, "--solution", sol, "--answers", empty], capsys)
    assert code == 0
    assert out.strip().startswith("recommended item: ")
