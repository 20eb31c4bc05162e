"""Sparse model builder for mixed-binary linear programs."""
from __future__ import annotations

import math
from typing import Dict, Iterable, Mapping, Optional, Union

import numpy as np
import scipy.sparse as sp

from ..core import _normalize_relation

INF = math.inf


class LinExpr:
    """Linear expression ``sum_j coef_j * var_j + const`` over variable ids.

    In arithmetic, plain numbers are constants.  Variables enter through
    :meth:`add`, :meth:`add_dot` or :meth:`LinExpr.of` (where an integer is a
    variable id).
    """

    __slots__ = ("terms", "const")

    def __init__(self, terms: Optional[Mapping[int, float]] = None, const: float = 0.0):
        self.terms: Dict[int, float] = dict(terms) if terms else {}
        self.const = float(const)

    @classmethod
    def of(cls, obj) -> "LinExpr":
        if isinstance(obj, LinExpr):
            return obj
        if isinstance(obj, Mapping):
            return cls(obj)
        if isinstance(obj, (int, np.integer)):
            return cls({int(obj): 1.0})
        if isinstance(obj, (float, np.floating)):
            return cls(const=float(obj))
        return cls(dict((int(j), float(c)) for j, c in obj))

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.const)

    def add(self, var: int, coef: float = 1.0) -> "LinExpr":
        if coef:
            var = int(var)
            self.terms[var] = self.terms.get(var, 0.0) + float(coef)
        return self

    def add_dot(self, vars_, coefs) -> "LinExpr":
        """In place ``+= coefs @ vars_`` skipping zero coefficients."""
        coefs = np.asarray(coefs, float)
        for j in np.flatnonzero(coefs):
            self.add(vars_[j], coefs[j])
        return self

    def add_expr(self, other: "LinExpr", scale: float = 1.0) -> "LinExpr":
        for j, c in other.terms.items():
            self.add(j, scale * c)
        self.const += scale * other.const
        return self

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, (int, float, np.number)):
            out.const += float(other)
            return out
        return out.add_expr(LinExpr.of(other))

    __radd__ = __add__

    def __sub__(self, other):
        out = self.copy()
        if isinstance(other, (int, float, np.number)):
            out.const -= float(other)
            return out
        return out.add_expr(LinExpr.of(other), -1.0)

    def __neg__(self):
        return LinExpr({j: -c for j, c in self.terms.items()}, -self.const)

    def __mul__(self, scalar: float):
        s = float(scalar)
        return LinExpr({j: s * c for j, c in self.terms.items()}, s * self.const)

    __rmul__ = __mul__

    def value(self, x) -> float:
        return self.const + sum(c * float(x[j]) for j, c in self.terms.items())

    def __repr__(self):
        parts = [f"{c:+g}*v{j}" for j, c in sorted(self.terms.items())]
        if self.const or not parts:
            parts.append(f"{self.const:+g}")
        return " ".join(parts)


class MilpModel:
    """Mixed-binary linear program in minimization form.

    Variables are referenced by integer id.  ``groups`` maps a name to an
    ``ndarray`` of ids so that builders can hand structured views of the
    solution vector back to callers.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list = []
        self.lb: list = []
        self.ub: list = []
        self.is_binary: list = []
        self.rows: list = []  # (dict id -> coef, relation, rhs, name)
        self.objective = LinExpr()
        self.groups: Dict[str, np.ndarray] = {}
        self.meta: dict = {}
        self._products: Dict[tuple, int] = {}

    # variables -----------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def binary_ids(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.is_binary, dtype=bool))

    @property
    def has_binaries(self) -> bool:
        return any(self.is_binary)

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, binary: bool = False) -> int:
        if binary:
            lb, ub = max(0.0, float(lb)), min(1.0, float(ub))
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ValueError(f"variable {name!r}: invalid bounds [{lb}, {ub}]")
        self.var_names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.is_binary.append(bool(binary))
        return len(self.var_names) - 1

    def add_vars(self, name: str, shape, lb: float = 0.0, ub: float = INF, binary: bool = False,
                 group: Optional[str] = None) -> np.ndarray:
        """Add an array of variables; ``lb`` and ``ub`` broadcast to ``shape``."""
        shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
        ids = np.empty(shape, dtype=np.int64)
        lbs = np.broadcast_to(np.asarray(lb, float).reshape(-1) if np.ndim(lb) else lb, (int(np.prod(shape)),))
        ubs = np.broadcast_to(np.asarray(ub, float).reshape(-1) if np.ndim(ub) else ub, (int(np.prod(shape)),))
        for flat, pos in enumerate(np.ndindex(*shape) if shape else [()]):
            label = f"{name}[{','.join(map(str, pos))}]" if pos else name
            ids[pos] = self.add_var(label, lbs[flat], ubs[flat], binary)
        if group is not None:
            self.groups[group] = ids
        return ids

    def set_bounds(self, var: int, lb: Optional[float] = None, ub: Optional[float] = None) -> None:
        if lb is not None:
            self.lb[var] = float(lb)
        if ub is not None:
            self.ub[var] = float(ub)
        if self.lb[var] > self.ub[var]:
            raise ValueError(f"variable {self.var_names[var]!r}: empty bounds after update")

    def fix(self, var: int, value: float) -> None:
        self.lb[var] = self.ub[var] = float(value)

    def copy(self) -> "MilpModel":
        m = MilpModel(self.name)
        m.var_names = list(self.var_names)
        m.lb, m.ub, m.is_binary = list(self.lb), list(self.ub), list(self.is_binary)
        m.rows = [(dict(r[0]), r[1], r[2], r[3]) for r in self.rows]
        m.objective = self.objective.copy()
        m.groups = {k: v.copy() for k, v in self.groups.items()}
        m.meta = dict(self.meta)
        m._products = dict(self._products)
        return m

    # constraints ---------------------------------------------------------
    def add_constr(self, expr: Union[LinExpr, Mapping, Iterable], rel: str, rhs: float = 0.0,
                   name: Optional[str] = None) -> int:
        expr = LinExpr.of(expr)
        rel = _normalize_relation(rel)
        n = self.n_vars
        terms = {}
        for j, c in expr.terms.items():
            if not 0 <= j < n:
                raise IndexError(f"constraint references unknown variable id {j}")
            if c != 0.0:
                terms[j] = c
        self.rows.append((terms, rel, float(rhs) - expr.const, name))
        return len(self.rows) - 1

    def add_eq(self, lhs, rhs_expr) -> int:
        """Add ``lhs == rhs_expr`` where both sides are expressions."""
        return self.add_constr(LinExpr.of(lhs) - LinExpr.of(rhs_expr), "==", 0.0)

    def set_objective(self, expr, const: float = 0.0) -> None:
        expr = LinExpr.of(expr).copy()
        expr.const += const
        self.objective = expr

    # products ------------------------------------------------------------
    def product(self, z: int, c: int, lo: Optional[float] = None, hi: Optional[float] = None) -> int:
        """Cached :func:`add_product_bin_cont` using ``c``'s own bounds by default."""
        key = (int(z), int(c))
        if key not in self._products:
            lo = self.lb[c] if lo is None else lo
            hi = self.ub[c] if hi is None else hi
            self._products[key] = add_product_bin_cont(self, z, c, lo, hi)
        return self._products[key]

    def times(self, expr: LinExpr, z: int) -> LinExpr:
        """Linearize ``z * expr`` for binary ``z`` and bounded continuous terms."""
        out = LinExpr()
        for j, coef in expr.terms.items():
            if self.is_binary[j]:
                if j == z:
                    out.add(j, coef)
                else:
                    raise ValueError("times() only supports binary-continuous products")
            else:
                out.add(self.product(z, j), coef)
        if expr.const:
            out.add(z, expr.const)
        return out

    # export --------------------------------------------------------------
    def to_arrays(self):
        """Return ``(c, A, row_lo, row_hi, lb, ub, integrality, const)`` with CSR ``A``."""
        n = self.n_vars
        c = np.zeros(n)
        for j, v in self.objective.terms.items():
            c[j] += v
        ri, ci, vals = [], [], []
        lo = np.empty(self.n_rows)
        hi = np.empty(self.n_rows)
        for r, (terms, rel, rhs, _) in enumerate(self.rows):
            ri.extend([r] * len(terms))
            ci.extend(terms.keys())
            vals.extend(terms.values())
            lo[r] = rhs if rel in ("==", ">=") else -INF
            hi[r] = rhs if rel in ("==", "<=") else INF
        A = sp.csr_matrix((vals, (ri, ci)), shape=(self.n_rows, n))
        return (c, A, lo, hi, np.asarray(self.lb, float), np.asarray(self.ub, float),
                np.asarray(self.is_binary, bool), self.objective.const)

    def row_activity(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return np.array([sum(c * x[j] for j, c in terms.items()) for terms, _, _, _ in self.rows])

    def max_violation(self, x) -> float:
        """Largest bound or row violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, float)
        viol = 0.0
        if self.n_vars:
            viol = max(viol, float(np.max(np.asarray(self.lb) - x, initial=0.0)),
                       float(np.max(x - np.asarray(self.ub), initial=0.0)))
        for (terms, rel, rhs, _), act in zip(self.rows, self.row_activity(x)):
            if rel == "<=":
                viol = max(viol, act - rhs)
            elif rel == ">=":
                viol = max(viol, rhs - act)
            else:
                viol = max(viol, abs(act - rhs))
        return viol

    def __repr__(self):
        return (f"MilpModel({self.name!r}, vars={self.n_vars}, binaries={int(sum(self.is_binary))}, "
                f"rows={self.n_rows})")


def add_product_bin_cont(model: MilpModel, z: int, c: int, lo: float, hi: float) -> int:
    """Add ``p = z * c`` for binary ``z`` and continuous ``c`` in ``[lo, hi]``.

    Uses the four McCormick rows, which are exact whenever ``z`` is 0 or 1.
    Returns the id of the new variable ``p``.
    """
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("add_product_bin_cont requires finite bounds on the continuous factor")
    if lo > hi:
        raise ValueError("add_product_bin_cont: lo > hi")
    p = model.add_var(f"prod[{model.var_names[z]}*{model.var_names[c]}]", min(lo, 0.0), max(hi, 0.0))
    # p <= c - lo (1 - z)
    model.add_constr({p: 1.0, c: -1.0, z: -lo}, "<=", -lo)
    # p >= c - hi (1 - z)
    model.add_constr({p: 1.0, c: -1.0, z: -hi}, ">=", -hi)
    # p <= hi z ;  p >= lo z
    model.add_constr({p: 1.0, z: -hi}, "<=", 0.0)
    model.add_constr({p: 1.0, z: -lo}, ">=", 0.0)
    return p
