"""Writer for the CPLEX LP text format."""
from __future__ import annotations

import math
import os
import re

from .model import MilpModel

_BAD = re.compile(r"[^A-Za-z0-9_.]")
_TERMS_PER_LINE = 6


def _num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _names(model: MilpModel) -> list:
    out, seen = [], set()
    for j, raw in enumerate(model.var_names):
        name = _BAD.sub("_", raw).strip("_") or "v"
        if name[0].isdigit() or name[0] in ".eE":
            name = "v_" + name
        if name in seen:
            name = f"{name}__{j}"
        seen.add(name)
        out.append(name)
    return out


def _terms(pairs, names) -> list:
    toks = []
    for j, c in pairs:
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        coef = "" if mag == 1.0 else _num(mag) + " "
        toks.append(f"{sign} {coef}{names[j]}")
    if toks and toks[0].startswith("+ "):
        toks[0] = toks[0][2:]
    return toks


def _wrap(prefix: str, toks: list, suffix: str = "") -> list:
    lines = []
    for i in range(0, max(len(toks), 1), _TERMS_PER_LINE):
        chunk = " ".join(toks[i:i + _TERMS_PER_LINE]) if toks else "0"
        lines.append(("" if i else prefix) + ("   " if i else "") + chunk)
    if suffix:
        lines[-1] += suffix
    return lines


def format_lp(model: MilpModel) -> str:
    """Render ``model`` as LP text with variables in id order."""
    names = _names(model)
    lines = [f"\\ Problem: {model.name}", "Minimize"]
    obj = sorted(model.objective.terms.items())
    toks = _terms([(j, c) for j, c in obj if c != 0.0], names)
    const = model.objective.const
    if const:
        toks.append(("- " if const < 0 else "+ ") + _num(abs(const)) + " obj_const")
    lines += _wrap(" obj: ", toks)
    lines.append("Subject To")
    used = set()
    for r, (terms, rel, rhs, rname) in enumerate(model.rows):
        label = _BAD.sub("_", rname) if rname else ""
        if not label or label[0].isdigit() or label in used:
            label = f"c{r}"
        while label in used:
            label += "_"
        used.add(label)
        toks = _terms(sorted(terms.items()), names)
        if not toks:
            toks = ["0 obj_const"]
        lines += _wrap(f" {label}: ", toks, f" {rel if rel != '==' else '='} {_num(rhs)}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        if model.is_binary[j]:
            if model.lb[j] == model.ub[j]:
                lines.append(f" {name} = {_num(model.lb[j])}")
            continue
        lo, hi = model.lb[j], model.ub[j]
        if lo == hi:
            lines.append(f" {name} = {_num(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            lines.append(f" {name} free")
        elif math.isinf(hi):
            if lo != 0.0:
                lines.append(f" {name} >= {_num(lo)}")
        elif math.isinf(lo):
            lines.append(f" -inf <= {name} <= {_num(hi)}")
        else:
            lines.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    if const or any(not terms for terms, _, _, _ in model.rows):
        lines.append(" obj_const = 1")
    bins = [names[j] for j in model.binary_ids]
    if bins:
        lines.append("Binaries")
        for i in range(0, len(bins), 8):
            lines.append(" " + " ".join(bins[i:i + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp_file(model: MilpModel, path) -> str:
    """Write ``model`` to ``path`` in LP format and return the path."""
    path = os.fspath(path)
    text = format_lp(model)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)
    return path
