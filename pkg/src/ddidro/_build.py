"""Helpers shared by the reformulation builders."""
from __future__ import annotations

from typing import Mapping, Optional

import numpy as np

from .core import BinaryFeasibleSet, DdidInstance, SolverOptions
from .milp import LinExpr, MilpModel


def add_set_rows(model: MilpModel, ids, bset: BinaryFeasibleSet, tag: str = "") -> None:
    ids = np.asarray(ids).reshape(-1)
    for r, (coef, rel, rhs) in enumerate(bset.constraints):
        model.add_constr(LinExpr().add_dot(ids, coef), rel, rhs, name=f"{tag}set{r}" if tag else None)


def add_decisions(model: MilpModel, inst: DdidInstance, K: int):
    """Create ``x``, ``w`` and ``K`` policies with their feasible-set rows.

    Coordinates that cannot be observed get a ``w`` variable fixed at 0.
    """
    x = model.add_vars("x", inst.n_x, binary=True, group="x")
    w = model.add_vars("w", inst.n_xi, binary=True, group="w")
    for i in np.flatnonzero(~inst.xi.observable_mask):
        model.fix(int(w[i]), 0.0)
    y = model.add_vars("y", (K, inst.n_y), binary=True, group="y")
    add_set_rows(model, x, inst.setX, "X")
    add_set_rows(model, w, inst.setW, "W")
    for k in range(K):
        add_set_rows(model, y[k], inst.setY, f"Y{k}")
    return x, w, y


def apply_fixed(model: MilpModel, fixed: Optional[Mapping]) -> None:
    """Fix decision variables: ``fixed`` may hold ``x``, ``w`` and ``policies``.

    ``policies`` may list fewer than ``K`` rows; only those leading policies
    are frozen (used by the greedy heuristic).
    """
    if not fixed:
        return
    for key, group in (("x", "x"), ("w", "w")):
        if fixed.get(key) is not None:
            vals = np.asarray(fixed[key], float).reshape(-1)
            ids = model.groups[group]
            if vals.shape[0] != ids.shape[0]:
                raise ValueError(f"fixed {key} has length {vals.shape[0]}, expected {ids.shape[0]}")
            for j, v in zip(ids, vals):
                if model.ub[int(j)] < v:
                    raise ValueError(f"cannot fix {model.var_names[int(j)]} to {v}: coordinate is masked")
                model.fix(int(j), float(v))
    if fixed.get("policies") is not None:
        pols = np.atleast_2d(np.asarray(fixed["policies"], float))
        y = model.groups["y"]
        if pols.shape[0] > y.shape[0]:
            raise ValueError("more fixed policies than K")
        for k in range(pols.shape[0]):
            for j, v in zip(y[k], pols[k]):
                model.fix(int(j), float(v))


def deterministic_rows(model: MilpModel, inst: DdidInstance, x, w, y, k: int) -> None:
    """``T x + V w + Wrec y^k <= h`` for one policy."""
    for l in range(inst.L):
        expr = LinExpr().add_dot(x, inst.T[l]).add_dot(w, inst.V[l]).add_dot(y[k], inst.Wrec[l])
        model.add_constr(expr, "<=", float(inst.h[l]))


def options(opts: Optional[SolverOptions]) -> SolverOptions:
    return SolverOptions() if opts is None else opts


def symmetry_enabled(opts: SolverOptions, K: int) -> bool:
    if K < 2:
        return False
    if opts.symmetry_breaking is None:
        return K >= 3
    return bool(opts.symmetry_breaking)


def apply_symmetry(model: MilpModel, inst: DdidInstance, K: int, opts: SolverOptions, fixed=None) -> str:
    """Add the suitable symmetry-breaking rows; return which variant was used."""
    if not symmetry_enabled(opts, K):
        return "none"
    if fixed and fixed.get("policies") is not None:
        return "none"
    from .speedups import add_pe_symmetry_breaking, add_symmetry_breaking

    y = model.groups["y"]
    if inst.setY.is_unit_simplex() and K <= inst.n_y:
        add_pe_symmetry_breaking(model, y)
        return "pe"
    add_symmetry_breaking(model, y)
    return "general"


def nonzero_cols(*mats) -> np.ndarray:
    """Indices of columns that are nonzero in any of ``mats`` (stacked vertically)."""
    stacked = np.vstack([np.atleast_2d(m) for m in mats])
    return np.flatnonzero(np.any(stacked != 0.0, axis=0))


def rounded(a) -> np.ndarray:
    """Round binary values and normalize negative zeros."""
    return np.round(np.asarray(a, float)) + 0.0
