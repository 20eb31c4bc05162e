"""Input checks and post-solve audits."""
from __future__ import annotations

import numbers
from typing import Iterable, Optional

import numpy as np

from .core import BinaryFeasibleSet, DdidInstance, validate_instance


class InstanceError(ValueError):
    """Raised when instance data fails validation."""


def check_instance(inst: DdidInstance, *, mode: Optional[str] = None) -> DdidInstance:
    """Return ``inst`` unchanged or raise :class:`InstanceError` listing every problem.

    ``mode`` may be ``"objective"`` or ``"constraint"`` to also demand the
    matching right-hand-side form.
    """
    if not isinstance(inst, DdidInstance):
        raise TypeError(f"expected a DdidInstance, got {type(inst).__name__}")
    report = validate_instance(inst)
    if mode == "objective" and inst.rhs_mode != "constant":
        report.append("rhs mode: objective pipeline needs a constant right-hand side")
    if mode == "constraint" and inst.rhs_mode != "uncertain":
        report.append("rhs mode: constraint pipeline needs an uncertain right-hand side H")
    if report:
        raise InstanceError("invalid instance:\n  " + "\n  ".join(report))
    return inst


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_binary_vector(v, dim: int, name: str, bset: Optional[BinaryFeasibleSet] = None) -> np.ndarray:
    a = np.asarray(v, float).reshape(-1)
    if a.shape[0] != dim:
        raise ValueError(f"{name} has length {a.shape[0]}, expected {dim}")
    if not np.all((a == 0.0) | (a == 1.0)):
        raise ValueError(f"{name} must be a 0/1 vector")
    if bset is not None and not bset.contains(a):
        raise ValueError(f"{name} is not a member of its feasible set")
    return a


def check_policies(inst: DdidInstance, policies, K: Optional[int] = None) -> np.ndarray:
    p = np.atleast_2d(np.asarray(policies, float))
    if K is not None and p.shape[0] != K:
        raise ValueError(f"expected {K} policies, got {p.shape[0]}")
    for k, y in enumerate(p):
        check_binary_vector(y, inst.n_y, f"policy {k}", inst.setY)
    return p


def at_big_m(model, primal, tol: float = 1e-9, candidates: Optional[Iterable[int]] = None) -> list:
    """Variables among ``candidates`` (default ``model.meta['big_m_vars']``) sitting at ``+-M``."""
    if primal is None:
        return []
    M = float(model.meta["big_M"])
    ids = model.meta.get("big_m_vars", []) if candidates is None else candidates
    thr = M - max(tol, 1e-9 * M)
    return [int(j) for j in ids if abs(primal[int(j)]) >= thr]


def linearization_residual(model, primal) -> float:
    """Largest ``|p - z * c|`` over the model's cached binary-continuous products."""
    if primal is None or not model._products:
        return 0.0
    worst = 0.0
    for (z, c), p in model._products.items():
        zv = round(float(primal[z]))
        worst = max(worst, abs(float(primal[p]) - zv * float(primal[c])))
    return worst


def binding_big_m(model, primal, tol: float = 1e-9) -> list:
    """Active multipliers of the objective reformulation that sit at the big-M bound.

    A multiplier ``gamma[k, i]`` only enters the model through ``w_i * gamma[k, i]``,
    so entries for unobserved coordinates are free to rest at a bound and are
    ignored.
    """
    if primal is None:
        return []
    g = model.groups
    if "gamma" not in g or "w" not in g:
        return at_big_m(model, primal, tol)
    w = np.round(primal[g["w"]])
    gamma = g["gamma"]
    cand = [int(gamma[k, i]) for k in range(gamma.shape[0]) for i in np.flatnonzero(w > 0.5)]
    return at_big_m(model, primal, tol, cand)
