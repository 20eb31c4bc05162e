"""Result containers returned by the solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class DualBlock:
    """Dual multipliers certifying the worst-case cost of fixed decisions.

    ``alpha`` weights the policies, ``beta`` prices the rows of ``A xi <= b``
    for the nominal scenario, ``beta_k[k]`` those of policy ``k``'s scenario
    and ``gamma_k[k]`` the observation-coupling equalities.
    """

    alpha: np.ndarray
    beta: np.ndarray
    beta_k: np.ndarray
    gamma_k: np.ndarray

    def value(self, b) -> float:
        b = np.asarray(b, float)
        return float(b @ self.beta + np.sum(self.beta_k @ b))

    def to_dict(self) -> dict:
        return {k: np.asarray(getattr(self, k)).tolist() for k in ("alpha", "beta", "beta_k", "gamma_k")}


@dataclass
class KAdaptSolution:
    """Here-and-now decisions ``(x, w)`` with ``K`` candidate policies.

    ``value`` is reported in the sense of the instance the caller passed in;
    ``internal_value`` is the canonical (minimization) value.  An infeasible
    problem has status ``"Infeasible"`` and an infinite value.
    """

    status: str
    value: float
    x: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    policies: Optional[np.ndarray] = None
    duals: Optional[object] = None
    internal_value: float = math.nan
    method: str = ""
    K: int = 0
    info: dict = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return str(self.status) == "Optimal"

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).astype(float).tolist()

        duals = self.duals.to_dict() if hasattr(self.duals, "to_dict") else None
        info = {k: v for k, v in self.info.items() if isinstance(v, (int, float, str, bool, list, type(None)))}
        return {
            "status": str(self.status),
            "value": _num(self.value),
            "internal_value": _num(self.internal_value),
            "method": self.method,
            "K": int(self.K),
            "x": arr(self.x),
            "w": arr(self.w),
            "policies": arr(self.policies),
            "duals": duals,
            "info": info,
        }


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return v


def parse_num(v) -> float:
    if isinstance(v, str):
        return float(v)
    return math.nan if v is None else float(v)
