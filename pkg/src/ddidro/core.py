"""Problem data for two-stage robust problems with decision-dependent
information discovery.

All matrices follow the convention that the uncertain vector ``xi`` multiplies
from the left, i.e. the cost of a decision ``(x, w, y)`` under ``xi`` is
``xi @ C @ x + xi @ D @ w + xi @ Qm @ y``.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

MINIMIZE = "minimize"
MAXIMIZE = "maximize"

RELATIONS = ("<=", "==", ">=")


def _normalize_relation(rel: str) -> str:
    rel = rel.strip()
    if rel in ("=", "=="):
        return "=="
    if rel in ("<=", "=<", "≤"):
        return "<="
    if rel in (">=", "=>", "≥"):
        return ">="
    raise ValueError(f"unknown relation {rel!r}")


def _frozen_array(a, shape=None, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class UncertaintySet:
    """Polyhedron ``{xi : A xi <= b}`` plus the coordinates that may be observed.

    Equality rows are stored as paired inequalities, so every dual multiplier
    attached to a row of ``A`` is nonnegative.
    """

    A: np.ndarray
    b: np.ndarray
    observable_mask: np.ndarray

    def __post_init__(self):
        b = _frozen_array(self.b).reshape(-1)
        A = np.asarray(self.A, dtype=float)
        mask = np.asarray(self.observable_mask, dtype=bool).reshape(-1)
        if A.size == 0:
            A = A.reshape(b.shape[0], mask.shape[0])
        object.__setattr__(self, "A", _frozen_array(A))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "observable_mask", _frozen_array(mask, dtype=bool))
        if self.A.ndim != 2 or self.A.shape != (self.b.shape[0], self.observable_mask.shape[0]):
            raise ValueError(
                f"A has shape {self.A.shape}, expected ({self.b.shape[0]}, {self.observable_mask.shape[0]})"
            )

    @property
    def dim(self) -> int:
        return self.observable_mask.shape[0]

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    @classmethod
    def from_constraints(cls, dim, A_ub=None, b_ub=None, A_eq=None, b_eq=None, observable_mask=None):
        blocks_A, blocks_b = [], []
        if A_ub is not None and len(A_ub):
            blocks_A.append(np.atleast_2d(np.asarray(A_ub, float)))
            blocks_b.append(np.asarray(b_ub, float).reshape(-1))
        if A_eq is not None and len(A_eq):
            Aeq = np.atleast_2d(np.asarray(A_eq, float))
            beq = np.asarray(b_eq, float).reshape(-1)
            blocks_A += [Aeq, -Aeq]
            blocks_b += [beq, -beq]
        A = np.vstack(blocks_A) if blocks_A else np.zeros((0, dim))
        b = np.concatenate(blocks_b) if blocks_b else np.zeros(0)
        if observable_mask is None:
            observable_mask = np.ones(dim, dtype=bool)
        return cls(A, b, observable_mask)

    @classmethod
    def box(cls, lower, upper, observable_mask=None):
        lower = np.asarray(lower, float)
        upper = np.asarray(upper, float)
        n = lower.shape[0]
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]),
                   np.ones(n, bool) if observable_mask is None else observable_mask)

    def contains(self, xi, tol: float = 1e-9) -> bool:
        xi = np.asarray(xi, float)
        return bool(np.all(self.A @ xi <= self.b + tol))

    def coordinate_bounds(self) -> np.ndarray:
        """Return an ``(dim, 2)`` array of coordinate minima and maxima.

        Infinite entries mean the polyhedron is unbounded in that direction and
        ``nan`` rows mean it is empty.
        """
        cached = self.__dict__.get("_bounds")
        if cached is not None:
            return cached
        from .milp.simplex import simplex_solve

        n = self.dim
        out = np.empty((n, 2))
        lb = np.full(n, -np.inf)
        ub = np.full(n, np.inf)
        rlo = np.full(self.n_rows, -np.inf)
        for j in range(n):
            for col, sign in ((0, 1.0), (1, -1.0)):
                c = np.zeros(n)
                c[j] = sign
                res = simplex_solve(c, self.A, rlo, self.b, lb, ub)
                if res.status == "Optimal":
                    out[j, col] = sign * res.value
                elif res.status == "Unbounded":
                    out[j, col] = -np.inf if col == 0 else np.inf
                else:
                    out[j, col] = np.nan
        out.flags.writeable = False
        object.__setattr__(self, "_bounds", out)
        return out


@dataclass(frozen=True)
class BinaryFeasibleSet:
    """``{v in {0,1}^dim : a_r @ v (rel_r) rhs_r for every row r}``."""

    dim: int
    constraints: tuple = ()

    def __post_init__(self):
        rows = []
        for coef, rel, rhs in self.constraints:
            coef = _frozen_array(coef).reshape(-1)
            if coef.shape[0] != self.dim:
                raise ValueError(f"constraint has {coef.shape[0]} coefficients, set has dim {self.dim}")
            rows.append((coef, _normalize_relation(rel), float(rhs)))
        object.__setattr__(self, "constraints", tuple(rows))

    @classmethod
    def free(cls, dim: int) -> "BinaryFeasibleSet":
        return cls(dim, ())

    @classmethod
    def unit_simplex(cls, dim: int) -> "BinaryFeasibleSet":
        return cls(dim, ((np.ones(dim), "==", 1.0),))

    @classmethod
    def cardinality(cls, dim: int, count: int, rel: str = "==", support=None) -> "BinaryFeasibleSet":
        """Vectors with ``sum(v[support]) (rel) count``; entries outside ``support`` fixed at 0."""
        coef = np.zeros(dim)
        support = np.arange(dim) if support is None else np.asarray(support)
        coef[support] = 1.0
        rows = [(coef, rel, count)]
        rows += [(np.eye(dim)[i], "==", 0.0) for i in range(dim) if i not in set(support.tolist())]
        return cls(dim, tuple(rows))

    def with_constraints(self, rows: Iterable) -> "BinaryFeasibleSet":
        return BinaryFeasibleSet(self.dim, tuple(self.constraints) + tuple(rows))

    def with_zeros(self, indices: Iterable[int]) -> "BinaryFeasibleSet":
        eye = np.eye(self.dim)
        return self.with_constraints((eye[i], "==", 0.0) for i in indices)

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, float).reshape(-1)
        if v.shape[0] != self.dim:
            return False
        if np.any(np.abs(v - np.round(v)) > tol) or np.any((v < -tol) | (v > 1 + tol)):
            return False
        for coef, rel, rhs in self.constraints:
            lhs = float(coef @ v)
            if rel == "<=" and lhs > rhs + tol:
                return False
            if rel == ">=" and lhs < rhs - tol:
                return False
            if rel == "==" and abs(lhs - rhs) > tol:
                return False
        return True

    def is_unit_simplex(self) -> bool:
        """True when the members are exactly the unit vectors."""
        for coef, rel, rhs in self.constraints:
            if rel == "==" and rhs == 1.0 and np.all(coef == 1.0):
                return True
        if 0 < self.dim <= 12:
            from .oracles import enumerate_members

            members = enumerate_members(self)
            return len(members) == self.dim and all(m.sum() == 1 for m in members)
        return False

    def fixed_zero_indices(self) -> list:
        out = []
        for coef, rel, rhs in self.constraints:
            nz = np.flatnonzero(coef)
            if len(nz) == 1 and rhs == 0.0 and (rel == "==" or (rel == "<=" and coef[nz[0]] > 0)):
                out.append(int(nz[0]))
        return sorted(set(out))


def _empty_set(dim: int) -> BinaryFeasibleSet:
    return BinaryFeasibleSet.free(dim)


@dataclass(frozen=True)
class DdidInstance:
    """Two-stage robust problem with decision-dependent information discovery.

    ``rhs_mode`` is ``"constant"`` when ``h`` is given (objective uncertainty
    only) and ``"uncertain"`` when ``H`` is given (constraint uncertainty).
    The optional tensors ``Hx``, ``Hw``, ``Hy`` (shape ``L x N_xi x N_*``) make
    the right-hand side matrix affine in the decisions:
    ``H(x, w, y) = H + Hx @ x + Hw @ w + Hy @ y`` (contracted on the last axis).
    They are only used by the constraint-uncertainty pipeline.
    """

    C: np.ndarray
    D: np.ndarray
    Qm: np.ndarray
    T: np.ndarray
    V: np.ndarray
    Wrec: np.ndarray
    xi: UncertaintySet
    setX: BinaryFeasibleSet
    setW: BinaryFeasibleSet
    setY: BinaryFeasibleSet
    h: Optional[np.ndarray] = None
    H: Optional[np.ndarray] = None
    Hx: Optional[np.ndarray] = None
    Hw: Optional[np.ndarray] = None
    Hy: Optional[np.ndarray] = None
    sense: str = MINIMIZE
    name: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n_xi = self.xi.dim
        C = np.asarray(self.C, float)
        Qm = np.asarray(self.Qm, float)
        n_x = C.shape[1] if C.ndim == 2 else 0
        n_y = Qm.shape[1] if Qm.ndim == 2 else 0
        object.__setattr__(self, "C", _frozen_array(C, (n_xi, n_x)))
        object.__setattr__(self, "D", _frozen_array(self.D, (n_xi, n_xi)))
        object.__setattr__(self, "Qm", _frozen_array(Qm, (n_xi, n_y)))
        T = np.asarray(self.T, float)
        L = T.shape[0] if T.ndim == 2 else 0
        object.__setattr__(self, "T", _frozen_array(T, (L, n_x)))
        object.__setattr__(self, "V", _frozen_array(self.V, (L, n_xi)))
        object.__setattr__(self, "Wrec", _frozen_array(self.Wrec, (L, n_y)))
        if self.h is not None:
            object.__setattr__(self, "h", _frozen_array(self.h, (L,)))
        if self.H is not None:
            object.__setattr__(self, "H", _frozen_array(self.H, (L, n_xi)))
        for nm, width in (("Hx", n_x), ("Hw", n_xi), ("Hy", n_y)):
            val = getattr(self, nm)
            if val is not None:
                object.__setattr__(self, nm, _frozen_array(val, (L, n_xi, width)))
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise ValueError(f"sense must be {MINIMIZE!r} or {MAXIMIZE!r}")
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def n_x(self) -> int:
        return self.C.shape[1]

    @property
    def n_xi(self) -> int:
        return self.xi.dim

    @property
    def n_y(self) -> int:
        return self.Qm.shape[1]

    @property
    def L(self) -> int:
        return self.T.shape[0]

    @property
    def rhs_mode(self) -> str:
        if self.H is not None and self.h is None:
            return "uncertain"
        if self.h is not None and self.H is None:
            return "constant"
        return "invalid"

    @property
    def has_decision_dependent_rhs(self) -> bool:
        return any(getattr(self, nm) is not None for nm in ("Hx", "Hw", "Hy"))

    def replace(self, **changes) -> "DdidInstance":
        return dataclasses.replace(self, **changes)

    def cost_vector(self, x, w, y) -> np.ndarray:
        """``C x + D w + Qm y``: the cost coefficient on ``xi``."""
        return self.C @ np.asarray(x, float) + self.D @ np.asarray(w, float) + self.Qm @ np.asarray(y, float)

    def lhs(self, x, w, y) -> np.ndarray:
        """``T x + V w + Wrec y``."""
        return self.T @ np.asarray(x, float) + self.V @ np.asarray(w, float) + self.Wrec @ np.asarray(y, float)

    def rhs_matrix(self, x, w, y) -> np.ndarray:
        """Right-hand side matrix ``H(x, w, y)`` for constraint uncertainty."""
        Hm = np.array(self.H, dtype=float)
        if self.Hx is not None:
            Hm = Hm + self.Hx @ np.asarray(x, float)
        if self.Hw is not None:
            Hm = Hm + self.Hw @ np.asarray(w, float)
        if self.Hy is not None:
            Hm = Hm + self.Hy @ np.asarray(y, float)
        return Hm

    @classmethod
    def build(cls, xi: UncertaintySet, *, n_x=0, n_y=0, C=None, D=None, Qm=None, T=None, V=None,
              Wrec=None, h=None, H=None, setX=None, setW=None, setY=None, **kw) -> "DdidInstance":
        """Convenience constructor filling omitted blocks with zeros.

        ``setW`` defaults to the free set restricted by the observable mask.
        """
        n_xi = xi.dim
        if T is not None:
            L = np.asarray(T).reshape(-1, n_x).shape[0] if n_x else np.asarray(T).shape[0]
        elif Wrec is not None:
            L = np.asarray(Wrec, float).reshape(-1, n_y).shape[0]
        elif V is not None:
            L = np.asarray(V, float).reshape(-1, n_xi).shape[0]
        elif h is not None:
            L = len(np.asarray(h).reshape(-1))
        elif H is not None:
            L = np.asarray(H, float).reshape(-1, n_xi).shape[0]
        else:
            L = 0
        z = np.zeros
        if setW is None:
            setW = BinaryFeasibleSet.free(n_xi).with_zeros(np.flatnonzero(~xi.observable_mask))
        if h is None and H is None:
            h = z(L)
        return cls(
            C=z((n_xi, n_x)) if C is None else C,
            D=z((n_xi, n_xi)) if D is None else D,
            Qm=z((n_xi, n_y)) if Qm is None else Qm,
            T=z((L, n_x)) if T is None else T,
            V=z((L, n_xi)) if V is None else V,
            Wrec=z((L, n_y)) if Wrec is None else Wrec,
            h=h, H=H, xi=xi,
            setX=BinaryFeasibleSet.free(n_x) if setX is None else setX,
            setW=setW,
            setY=BinaryFeasibleSet.free(n_y) if setY is None else setY,
            **kw,
        )


@dataclass
class SolverOptions:
    """Numerical options shared by every solver entry point.

    ``big_M`` and ``eps_feasibility`` default to instance-derived values when
    left as ``None`` (see :func:`default_big_m` and :func:`default_epsilon`).
    """

    big_M: Optional[float] = None
    eps_feasibility: Optional[float] = None
    ccg_delta: float = 1e-3
    integrality_tol: float = 1e-9
    lp_feas_tol: float = 1e-9
    lp_opt_tol: float = 1e-9
    mip_gap: float = 1e-9
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    seed: int = 0
    engine: str = "highs"
    symmetry_breaking: Optional[bool] = None
    index_cap: int = 10_000
    pwl_cap: int = 4_096
    tree_cap: int = 4_096
    oracle_cap: int = 2 ** 16
    ccg_max_iter: int = 200
    max_big_m_retries: int = 3

    def __post_init__(self):
        for nm in ("ccg_delta", "integrality_tol", "lp_feas_tol", "lp_opt_tol"):
            if not getattr(self, nm) > 0:
                raise ValueError(f"{nm} must be strictly positive")
        if self.big_M is not None and not self.big_M > 0:
            raise ValueError("big_M must be strictly positive")
        if self.eps_feasibility is not None and not self.eps_feasibility > 0:
            raise ValueError("eps_feasibility must be strictly positive")
        if self.ccg_delta < 10 * self.lp_opt_tol:
            raise ValueError("ccg_delta must be at least 10 * lp_opt_tol")
        if self.node_limit is None and os.environ.get("DDIDRO_NODE_LIMIT"):
            self.node_limit = int(os.environ["DDIDRO_NODE_LIMIT"])
        if self.time_limit is None and os.environ.get("DDIDRO_TIME_LIMIT"):
            self.time_limit = float(os.environ["DDIDRO_TIME_LIMIT"])

    def replace(self, **changes) -> "SolverOptions":
        return dataclasses.replace(self, **changes)


def max_coordinate_range(xi: UncertaintySet) -> float:
    bounds = xi.coordinate_bounds()
    if xi.dim == 0:
        return 0.0
    return float(np.max(bounds[:, 1] - bounds[:, 0]))


def max_abs_coordinate(xi: UncertaintySet) -> float:
    bounds = xi.coordinate_bounds()
    if xi.dim == 0:
        return 0.0
    return float(np.max(np.abs(bounds)))


def default_big_m(inst: DdidInstance) -> float:
    blocks = [inst.C, inst.D, inst.Qm, inst.T, inst.V, inst.Wrec, inst.xi.b]
    blocks.append(inst.h if inst.h is not None else inst.H)
    for nm in ("Hx", "Hw", "Hy"):
        if getattr(inst, nm) is not None:
            blocks.append(getattr(inst, nm))
    biggest = max((float(np.max(np.abs(a))) for a in blocks if a is not None and np.size(a)), default=1.0)
    return 10.0 * max(biggest, 1.0) * (1.0 + max_coordinate_range(inst.xi))


def default_epsilon(inst: DdidInstance) -> float:
    if inst.H is None or inst.H.size == 0:
        return 1e-4
    return 1e-4 * (1.0 + float(np.max(np.linalg.norm(inst.H, axis=1))))


def validate_instance(inst: DdidInstance) -> list:
    """Check every structural invariant of ``inst``.

    Returns a list of human-readable violation strings (empty when the
    instance is well formed).  Each entry starts with a short code such as
    ``"unbounded uncertainty set"`` or ``"mask violation"``.
    """
    report = []
    n_xi, n_x, n_y = inst.n_xi, inst.n_x, inst.n_y
    if inst.setX.dim != n_x:
        report.append(f"dimension mismatch: setX.dim={inst.setX.dim}, N_x={n_x}")
    if inst.setW.dim != n_xi:
        report.append(f"dimension mismatch: setW.dim={inst.setW.dim}, N_xi={n_xi}")
    if inst.setY.dim != n_y:
        report.append(f"dimension mismatch: setY.dim={inst.setY.dim}, N_y={n_y}")
    if inst.rhs_mode == "invalid":
        report.append("rhs mode: exactly one of h (constant) or H (uncertain) must be given")
    if inst.rhs_mode == "constant" and inst.has_decision_dependent_rhs:
        report.append("rhs mode: decision-dependent rhs tensors require uncertain H")

    if n_xi == 0:
        report.append("empty uncertainty set: N_xi = 0")
    else:
        bounds = inst.xi.coordinate_bounds()
        if np.any(np.isnan(bounds)):
            report.append("empty uncertainty set: A xi <= b is infeasible")
        else:
            bad = np.flatnonzero(~np.isfinite(bounds).all(axis=1))
            if len(bad):
                report.append(f"unbounded uncertainty set: coordinates {bad.tolist()} have infinite range")

    if inst.setW.dim == n_xi:
        masked = np.flatnonzero(~inst.xi.observable_mask)
        fixed = set(inst.setW.fixed_zero_indices())
        loose = [int(i) for i in masked if int(i) not in fixed and _set_admits_one(inst.setW, int(i))]
        if loose:
            report.append(f"mask violation: setW permits w_i = 1 on unobservable coordinates {loose}")
    return report


def _set_admits_one(bset: BinaryFeasibleSet, i: int) -> bool:
    from .milp import MilpModel, solve_milp

    m = MilpModel("mask_check")
    v = m.add_vars("v", bset.dim, binary=True)
    for coef, rel, rhs in bset.constraints:
        m.add_constr({int(v[j]): float(coef[j]) for j in np.flatnonzero(coef)}, rel, rhs)
    m.add_constr({int(v[i]): 1.0}, "==", 1.0)
    return solve_milp(m, SolverOptions()).status == "Optimal"


def canonicalize(inst: DdidInstance) -> DdidInstance:
    """Return the instance in minimization form.

    Maximization instances have their objective matrices negated; the original
    sense is kept in ``metadata["original_sense"]`` so reported values can be
    flipped back with :func:`report_value`.
    """
    if inst.sense == MINIMIZE:
        return inst
    meta = dict(inst.metadata)
    meta["original_sense"] = MAXIMIZE
    return inst.replace(C=-inst.C, D=-inst.D, Qm=-inst.Qm, sense=MINIMIZE, metadata=meta)


def flip_sense(inst: DdidInstance) -> DdidInstance:
    """Negate the objective and swap the sense (an involution)."""
    new_sense = MAXIMIZE if inst.sense == MINIMIZE else MINIMIZE
    return inst.replace(C=-inst.C, D=-inst.D, Qm=-inst.Qm, sense=new_sense)


def original_sense(inst: DdidInstance) -> str:
    return inst.metadata.get("original_sense", inst.sense)


def report_value(inst: DdidInstance, internal_value: float) -> float:
    """Map a canonical (minimization) value back to the sense of ``inst``."""
    return -internal_value if original_sense(inst) == MAXIMIZE else internal_value


def slice_contains(xi_set: UncertaintySet, w: Sequence[int], xi_bar, candidate, tol=1e-9) -> bool:
    """Membership of ``candidate`` in ``{xi in Xi : w o xi = w o xi_bar}``."""
    w = np.asarray(w, float)
    if not xi_set.contains(candidate, tol):
        return False
    return bool(np.all(np.abs(w * (np.asarray(candidate) - np.asarray(xi_bar))) <= tol))
