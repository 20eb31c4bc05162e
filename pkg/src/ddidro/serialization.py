"""JSON files for instances, piecewise-linear objectives and solutions.

Instance files use schema ``"ddid-v1"``::

    {
      "schema": "ddid-v1",
      "name": str, "sense": "minimize" | "maximize",
      "dims": {"n_x": int, "n_xi": int, "n_y": int, "L": int},
      "xi": {"A": [[...]], "b": [...], "observable_mask": [bool, ...]},
      "C": [[...]], "D": [[...]], "Qm": [[...]], "T": [[...]], "V": [[...]], "Wrec": [[...]],
      "rhs": {"mode": "constant", "h": [...]}
           | {"mode": "uncertain", "H": [[...]], "Hx": [[[...]]] | null, "Hw": ..., "Hy": ...},
      "sets": {"X": SET, "W": SET, "Y": SET},
      "metadata": {...}
    }

where ``SET = {"dim": int, "constraints": [{"coef": [...], "rel": "<=" | "==" | ">=", "rhs": float}]}``.
Matrices are dense and row-major; all numbers are written with Python's
shortest round-trip float representation, so ``dumps(loads(text)) == text``
for any text produced by :func:`dumps_instance`.

Multi-stage instances use ``"ddid-ms-v1"`` with per-period lists ``D``,
``Q``, ``V``, ``W``, ``setW``, ``setY`` and the vectors ``h`` and ``w0``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Union

import numpy as np

from .core import BinaryFeasibleSet, DdidInstance, UncertaintySet
from .solution import KAdaptSolution, parse_num

SCHEMA = "ddid-v1"
MS_SCHEMA = "ddid-ms-v1"
PWL_SCHEMA = "ddid-pwl-v1"
SOLUTION_SCHEMA = "ddid-solution-v1"

PathLike = Union[str, Path]


class SchemaError(ValueError):
    """Raised when a JSON document does not follow the expected schema."""


def _mat(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _plain(obj):
    """Convert numpy scalars and arrays inside metadata to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def set_to_dict(s: BinaryFeasibleSet) -> dict:
    return {
        "dim": int(s.dim),
        "constraints": [{"coef": _mat(c), "rel": rel, "rhs": float(r)} for c, rel, r in s.constraints],
    }


def set_from_dict(d: dict) -> BinaryFeasibleSet:
    try:
        rows = tuple((c["coef"], c["rel"], c["rhs"]) for c in d["constraints"])
        return BinaryFeasibleSet(int(d["dim"]), rows)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed binary set: {exc}") from exc


def _xi_to_dict(xi: UncertaintySet) -> dict:
    return {"A": _mat(xi.A), "b": _mat(xi.b), "observable_mask": [bool(v) for v in xi.observable_mask]}


def _xi_from_dict(d: dict) -> UncertaintySet:
    return UncertaintySet(np.array(d["A"], dtype=float).reshape(len(d["b"]), len(d["observable_mask"])),
                          d["b"], d["observable_mask"])


def instance_to_dict(inst: DdidInstance) -> dict:
    rhs: dict
    if inst.rhs_mode == "constant":
        rhs = {"mode": "constant", "h": _mat(inst.h)}
    elif inst.rhs_mode == "uncertain":
        rhs = {"mode": "uncertain", "H": _mat(inst.H)}
        for nm in ("Hx", "Hw", "Hy"):
            v = getattr(inst, nm)
            rhs[nm] = None if v is None else _mat(v)
    else:
        raise SchemaError("instance must carry exactly one of h and H")
    return {
        "schema": SCHEMA,
        "name": inst.name,
        "sense": inst.sense,
        "dims": {"n_x": inst.n_x, "n_xi": inst.n_xi, "n_y": inst.n_y, "L": inst.L},
        "xi": _xi_to_dict(inst.xi),
        "C": _mat(inst.C), "D": _mat(inst.D), "Qm": _mat(inst.Qm),
        "T": _mat(inst.T), "V": _mat(inst.V), "Wrec": _mat(inst.Wrec),
        "rhs": rhs,
        "sets": {"X": set_to_dict(inst.setX), "W": set_to_dict(inst.setW), "Y": set_to_dict(inst.setY)},
        "metadata": _plain(inst.metadata),
    }


def _shaped(a, shape):
    arr = np.array(a, dtype=float)
    if arr.size == 0:
        return np.zeros(shape)
    if arr.shape != tuple(shape):
        raise SchemaError(f"array has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def instance_from_dict(d: dict) -> DdidInstance:
    if not isinstance(d, dict) or d.get("schema") != SCHEMA:
        raise SchemaError(f"expected schema {SCHEMA!r}, got {d.get('schema') if isinstance(d, dict) else d!r}")
    try:
        dims = d["dims"]
        n_x, n_xi, n_y, L = (int(dims[k]) for k in ("n_x", "n_xi", "n_y", "L"))
        xi = _xi_from_dict(d["xi"])
        if xi.dim != n_xi:
            raise SchemaError(f"uncertainty set has dimension {xi.dim}, dims say {n_xi}")
        rhs = d["rhs"]
        kw = {}
        if rhs["mode"] == "constant":
            kw["h"] = _shaped(rhs["h"], (L,))
        elif rhs["mode"] == "uncertain":
            kw["H"] = _shaped(rhs["H"], (L, n_xi))
            for nm, width in (("Hx", n_x), ("Hw", n_xi), ("Hy", n_y)):
                if rhs.get(nm) is not None:
                    kw[nm] = _shaped(rhs[nm], (L, n_xi, width))
        else:
            raise SchemaError(f"unknown rhs mode {rhs['mode']!r}")
        sets = d["sets"]
        return DdidInstance(
            C=_shaped(d["C"], (n_xi, n_x)), D=_shaped(d["D"], (n_xi, n_xi)), Qm=_shaped(d["Qm"], (n_xi, n_y)),
            T=_shaped(d["T"], (L, n_x)), V=_shaped(d["V"], (L, n_xi)), Wrec=_shaped(d["Wrec"], (L, n_y)),
            xi=xi, setX=set_from_dict(sets["X"]), setW=set_from_dict(sets["W"]), setY=set_from_dict(sets["Y"]),
            sense=d["sense"], name=d.get("name", ""), metadata=d.get("metadata", {}), **kw,
        )
    except KeyError as exc:
        raise SchemaError(f"missing field {exc}") from exc


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def dumps_instance(inst: DdidInstance) -> str:
    return dumps(instance_to_dict(inst))


def loads_instance(text: str) -> DdidInstance:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if isinstance(d, dict) and d.get("schema") == MS_SCHEMA:
        return multistage_from_dict(d)
    return instance_from_dict(d)


def save_instance(inst, path: PathLike) -> None:
    from .multistage import MultistageInstance

    text = dumps(multistage_to_dict(inst)) if isinstance(inst, MultistageInstance) else dumps_instance(inst)
    Path(path).write_text(text, encoding="utf-8")


def load_instance(path: PathLike):
    """Load a ``ddid-v1`` (or ``ddid-ms-v1``) file."""
    return loads_instance(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# multi-stage instances

def multistage_to_dict(ms) -> dict:
    return {
        "schema": MS_SCHEMA,
        "name": ms.name,
        "sense": ms.sense,
        "xi": _xi_to_dict(ms.xi),
        "D": [_mat(a) for a in ms.D],
        "Q": [_mat(a) for a in ms.Q],
        "V": [_mat(a) for a in ms.V],
        "W": [_mat(a) for a in ms.W],
        "h": _mat(ms.h),
        "setW": [set_to_dict(s) for s in ms.setW],
        "setY": [set_to_dict(s) for s in ms.setY],
        "w0": _mat(ms.w0),
        "metadata": _plain(ms.metadata),
    }


def multistage_from_dict(d: dict):
    from .multistage import MultistageInstance

    if d.get("schema") != MS_SCHEMA:
        raise SchemaError(f"expected schema {MS_SCHEMA!r}")
    try:
        return MultistageInstance(
            xi=_xi_from_dict(d["xi"]), D=tuple(d["D"]), Q=tuple(d["Q"]), V=tuple(d["V"]), W=tuple(d["W"]),
            h=d["h"], setW=tuple(set_from_dict(s) for s in d["setW"]),
            setY=tuple(set_from_dict(s) for s in d["setY"]), w0=d["w0"], sense=d["sense"],
            name=d.get("name", ""), metadata=d.get("metadata", {}),
        )
    except KeyError as exc:
        raise SchemaError(f"missing field {exc}") from exc


# ---------------------------------------------------------------------------
# piecewise-linear objectives and solutions

def save_pwl(pwl, path: PathLike) -> None:
    Path(path).write_text(dumps(dict(schema=PWL_SCHEMA, **pwl.to_dict())), encoding="utf-8")


def load_pwl(path: PathLike):
    from .pwl import PwlObjective

    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if d.get("schema") != PWL_SCHEMA:
        raise SchemaError(f"expected schema {PWL_SCHEMA!r}")
    return PwlObjective.from_dict(d)


def solution_to_dict(sol: KAdaptSolution) -> dict:
    d = sol.to_dict()
    d["info"] = _plain(d["info"])
    return dict(schema=SOLUTION_SCHEMA, **d)


def solution_from_dict(d: dict) -> KAdaptSolution:
    if d.get("schema") != SOLUTION_SCHEMA:
        raise SchemaError(f"expected schema {SOLUTION_SCHEMA!r}")

    def arr(v):
        return None if v is None else np.array(v, dtype=float)

    return KAdaptSolution(
        status=d["status"], value=parse_num(d["value"]), x=arr(d.get("x")), w=arr(d.get("w")),
        policies=arr(d.get("policies")), internal_value=parse_num(d.get("internal_value")),
        method=d.get("method", ""), K=int(d.get("K", 0)), info=dict(d.get("info") or {}),
    )


def save_solution(sol: KAdaptSolution, path: PathLike) -> None:
    Path(path).write_text(dumps(solution_to_dict(sol)), encoding="utf-8")


def load_solution(path: PathLike) -> KAdaptSolution:
    return solution_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
