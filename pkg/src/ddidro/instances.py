"""Problem-family builders.

Preference elicitation
    An agent with unknown utility vector ``u`` is asked ``Q`` of ``I`` items'
    utilities (on a 0 to 1 scale, possibly with answer noise of total size
    ``Gamma``) before one item is recommended.  The uncertainty set is kept in
    lifted form with coordinates ``(xi, u, e_plus, e_minus)``; only ``xi`` can
    be observed.

R&D portfolio
    Projects can be started now (revealing their return and cost) or next
    period at a reduced return, under an uncertain budget constraint.

The small example builders reproduce two hand-checkable instances used as
golden tests.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import MAXIMIZE, BinaryFeasibleSet, DdidInstance, UncertaintySet, canonicalize


@dataclass(frozen=True)
class PeInstance:
    """Item features ``Phi`` (one row per item) with the elicitation budget."""

    Phi: np.ndarray
    Gamma: float = 0.0
    Q: int = 1
    rho: float = field(default=None)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        Phi = np.array(self.Phi, dtype=float)
        if Phi.ndim != 2 or Phi.shape[0] < 1 or Phi.shape[1] < 1:
            raise ValueError("Phi must be a non-empty items x features matrix")
        Phi.setflags(write=False)
        object.__setattr__(self, "Phi", Phi)
        if self.Gamma < 0:
            raise ValueError("Gamma must be nonnegative")
        if not 0 <= int(self.Q) <= Phi.shape[0]:
            raise ValueError(f"Q must lie in [0, {Phi.shape[0]}]")
        object.__setattr__(self, "Q", int(self.Q))
        rho = float(np.max(np.abs(Phi).sum(axis=1)))
        if self.rho is not None and abs(float(self.rho) - rho) > 1e-12 * max(1.0, rho):
            raise ValueError(f"rho {self.rho} differs from the max row 1-norm {rho}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def I(self) -> int:  # noqa: E743 - item count, named as in the model
        return self.Phi.shape[0]

    @property
    def J(self) -> int:
        return self.Phi.shape[1]


def gen_synthetic_pe(I: int, J: int, Gamma: float = 0.0, Q: int = 1, seed: int = 0) -> PeInstance:
    """Features drawn i.i.d. uniform on [-1, 1] from ``numpy.random.default_rng(seed)``."""
    if I < 1 or J < 1:
        raise ValueError("I and J must be at least 1")
    rng = np.random.default_rng(seed)
    Phi = rng.uniform(-1.0, 1.0, size=(I, J))
    return PeInstance(Phi, Gamma, Q, metadata=dict(family="pe", I=I, J=J, Gamma=Gamma, Q=Q, seed=seed))


def pe_uncertainty_set(pe: PeInstance) -> UncertaintySet:
    """Lifted set over ``(xi, u, e_plus, e_minus)``.

    ``xi_i = (phi_i . u + rho) / (2 rho) + e_plus_i - e_minus_i`` with
    ``u`` in the unit box, ``sum(e_plus + e_minus) <= Gamma`` and ``xi`` in
    ``[0, 1]``.
    """
    I, J = pe.I, pe.J
    rho = pe.rho if pe.rho > 0 else 1.0
    n = 3 * I + J
    sx, su, sp, sm = 0, I, I + J, 2 * I + J
    A_eq = np.zeros((I, n))
    for i in range(I):
        A_eq[i, sx + i] = 1.0
        A_eq[i, su:su + J] = -pe.Phi[i] / (2.0 * rho)
        A_eq[i, sp + i] = -1.0
        A_eq[i, sm + i] = 1.0
    b_eq = np.full(I, 0.5)
    rows, rhs = [], []

    def bound(j, lo, hi):
        r = np.zeros(n)
        r[j] = 1.0
        rows.append(r.copy())
        rhs.append(hi)
        rows.append(-r)
        rhs.append(-lo)

    for i in range(I):
        bound(sx + i, 0.0, 1.0)
    for j in range(J):
        bound(su + j, -1.0, 1.0)
    for i in range(2 * I):
        r = np.zeros(n)
        r[sp + i] = -1.0
        rows.append(r)
        rhs.append(0.0)
    r = np.zeros(n)
    r[sp:] = 1.0
    rows.append(r)
    rhs.append(float(pe.Gamma))
    mask = np.zeros(n, dtype=bool)
    mask[:I] = True
    return UncertaintySet.from_constraints(n, np.array(rows), np.array(rhs), A_eq, b_eq, observable_mask=mask)


def build_pe_utility(pe: PeInstance) -> DdidInstance:
    """Worst-case utility of the recommended item (maximize)."""
    xi = pe_uncertainty_set(pe)
    I = pe.I
    Qm = np.zeros((xi.dim, I))
    Qm[:I, :I] = np.eye(I)
    setW = BinaryFeasibleSet(xi.dim, ((np.r_[np.ones(I), np.zeros(xi.dim - I)], "==", pe.Q),)).with_zeros(
        range(I, xi.dim))
    return DdidInstance.build(
        xi, n_x=0, n_y=I, Qm=Qm, setW=setW, setY=BinaryFeasibleSet.unit_simplex(I), sense=MAXIMIZE,
        name="pe-utility", metadata=dict(pe.metadata, Gamma=pe.Gamma, Q=pe.Q, rho=pe.rho),
    )


def build_pe_regret(pe: PeInstance):
    """Worst-case regret ``max_i xi_i - xi . y`` of the recommendation (minimize).

    Returns ``(instance, pwl)``; the instance carries the negated utility as
    its linear cost so that the regret pieces come from :func:`wcar_to_pwl`.
    """
    from .pwl import wcar_to_pwl

    util = build_pe_utility(pe)
    inst = canonicalize(util).replace(name="pe-regret")
    return inst, wcar_to_pwl(inst)


def build_rnd_portfolio(N: int, M: int, theta: float, B: float, r0=None, c0=None, Phi=None, Psi=None,
                        seed: int = 0) -> DdidInstance:
    """Two-period R&D portfolio with uncertain returns and costs (maximize).

    Coordinates are ``(xi_r, xi_c, zeta, 1)``: returns ``xi_r_i = (1 +
    Phi_i . zeta / 2) r0_i`` and costs ``xi_c_i = (1 + Psi_i . zeta / 2) c0_i``
    with risk factors ``zeta`` in ``[-1, 1]^M`` and a constant last
    coordinate.  ``w = (w_r, w_r)`` observes the return and cost of every
    project started now; ``y`` starts projects next period at a fraction
    ``theta`` of the return.  Rows: ``w_r + y <= 1`` and the budget
    ``(w_r + y) . xi_c <= B``, whose coefficients are decision dependent.
    Omitted data is drawn from ``default_rng(seed)``: nominal returns and costs
    uniform on [0.5, 1.5] and loadings uniform on [-1, 1] scaled by
    ``1 / M`` so that returns and costs stay positive.
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if B <= 0:
        raise ValueError("B must be positive")
    rng = np.random.default_rng(seed)
    r0 = rng.uniform(0.5, 1.5, N) if r0 is None else np.asarray(r0, float)
    c0 = rng.uniform(0.5, 1.5, N) if c0 is None else np.asarray(c0, float)
    Phi = rng.uniform(-1, 1, (N, M)) / max(M, 1) if Phi is None else np.asarray(Phi, float).reshape(N, M)
    Psi = rng.uniform(-1, 1, (N, M)) / max(M, 1) if Psi is None else np.asarray(Psi, float).reshape(N, M)
    n = 2 * N + M + 1
    sr, sc, sz, one = 0, N, 2 * N, 2 * N + M
    A_eq = np.zeros((2 * N + 1, n))
    b_eq = np.zeros(2 * N + 1)
    for i in range(N):
        A_eq[i, sr + i] = 1.0
        A_eq[i, sz:sz + M] = -Phi[i] * r0[i] / 2.0
        b_eq[i] = r0[i]
        A_eq[N + i, sc + i] = 1.0
        A_eq[N + i, sz:sz + M] = -Psi[i] * c0[i] / 2.0
        b_eq[N + i] = c0[i]
    A_eq[2 * N, one] = 1.0
    b_eq[2 * N] = 1.0
    rows, rhs = [], []
    for j in range(M):
        r = np.zeros(n)
        r[sz + j] = 1.0
        rows += [r, -r]
        rhs += [1.0, 1.0]
    mask = np.zeros(n, dtype=bool)
    mask[:2 * N] = True
    xi = UncertaintySet.from_constraints(n, np.array(rows).reshape(-1, n), np.array(rhs), A_eq, b_eq,
                                         observable_mask=mask)
    D = np.zeros((n, n))
    Qm = np.zeros((n, N))
    for i in range(N):
        D[sr + i, i] = 1.0
        Qm[sr + i, i] = theta
    L = N + 1
    V = np.zeros((L, n))
    Wrec = np.zeros((L, N))
    H = np.zeros((L, n))
    Hw = np.zeros((L, n, n))
    Hy = np.zeros((L, n, N))
    for i in range(N):
        V[i, i] = 1.0
        Wrec[i, i] = 1.0
        H[i, one] = 1.0
        Hw[N, sc + i, i] = -1.0
        Hy[N, sc + i, i] = -1.0
    H[N, one] = B
    cons = [(np.r_[np.eye(N)[i], -np.eye(N)[i], np.zeros(M + 1)], "==", 0.0) for i in range(N)]
    setW = BinaryFeasibleSet(n, tuple(cons)).with_zeros(range(2 * N, n))
    return DdidInstance.build(
        xi, n_x=0, n_y=N, D=D, Qm=Qm, V=V, Wrec=Wrec, H=H, Hw=Hw, Hy=Hy, setW=setW, sense=MAXIMIZE,
        name="rnd-portfolio",
        metadata=dict(family="rnd", N=N, M=M, theta=theta, B=B, seed=seed),
    )


def load_items_csv(path):
    """Read a headered CSV of reals and scale every column by its largest magnitude.

    Returns ``(matrix, column_names)``.  All-zero columns are left as they
    are, with a warning.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            names = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        data = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise ValueError(f"{path}:{lineno}: expected {len(names)} fields, got {len(row)}")
            try:
                data.append([float(c) for c in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    X = np.array(data, dtype=float).reshape(-1, len(names))
    scale = np.max(np.abs(X), axis=0) if X.size else np.zeros(len(names))
    zero = np.flatnonzero(scale == 0)
    if zero.size:
        warnings.warn(f"columns {[names[j] for j in zero]} are all zero and were left unscaled",
                      RuntimeWarning, stacklevel=2)
        scale[zero] = 1.0
    return X / scale, names


# ---------------------------------------------------------------------------
# small hand-checkable instances


def build_observation_cost_instance(d1: float = 0.4, d2: float = 0.4) -> DdidInstance:
    """Two observable parameters with observation costs ``d1`` and ``d2``.

    Coordinates ``(xi_1, xi_2, 1)`` with ``xi_1`` in [-1, 1] and ``xi_2`` in
    [-1.1, 1].  The cost of ``y`` is ``(y_2 - y_1)(xi_1 + xi_2) + d . w`` and
    ``y_1 >= xi_1`` must hold for every parameter value, with ``y_1 + y_2 =
    1``.  Observing only ``xi_1`` is optimal, with a value of ``1.1 + d1``
    that is approached but not attained.
    """
    xi = UncertaintySet.box([-1.0, -1.1, 1.0], [1.0, 1.0, 1.0], observable_mask=[True, True, False])
    Qm = np.zeros((3, 2))
    Qm[0] = Qm[1] = [-1.0, 1.0]
    D = np.zeros((3, 3))
    D[2, 0], D[2, 1] = d1, d2
    return DdidInstance.build(
        xi, n_x=0, n_y=2, Qm=Qm, D=D, Wrec=[[-1.0, 0.0]], H=[[-1.0, 0.0, 0.0]],
        setY=BinaryFeasibleSet(2, ((np.ones(2), "==", 1.0),)), name="observation-cost",
        metadata=dict(d1=d1, d2=d2),
    )


def build_threshold_instance(eps: float = 1e-3, lower: float = -1.0) -> DdidInstance:
    """Binary responses that must track thresholds: ``xi - eps <= y <= 1 + xi - eps``.

    Coordinates ``(xi_1, xi_2, 1)`` with ``xi`` in ``[lower, 1]^2``; the
    objective is zero.  Both parameters must be observed and four policies
    are needed, one per quadrant around ``eps``.  With ``lower < eps - 1``
    the upper row cannot hold near the lower corner, so the instance is
    infeasible for every K; ``lower = eps - 1`` is the largest box on which
    the constraints can always be met.
    """
    xi = UncertaintySet.box([lower, lower, 1.0], [1.0, 1.0, 1.0], observable_mask=[True, True, False])
    Wrec = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    H = np.array([[-1.0, 0.0, eps], [0.0, -1.0, eps], [1.0, 0.0, 1.0 - eps], [0.0, 1.0, 1.0 - eps]])
    return DdidInstance.build(xi, n_x=0, n_y=2, Wrec=Wrec, H=H, name="threshold",
                              metadata=dict(eps=eps, lower=lower))


# ---------------------------------------------------------------------------
# random small instances for property tests and benchmarks


def gen_random_objective_instance(seed: int, n_x: int = 1, n_xi: int = 3, n_y: int = 2,
                                  budget: Optional[int] = None, n_rows: int = 1) -> DdidInstance:
    """Small random instance with objective uncertainty.

    The uncertainty set is a box cut by one random row; cost data are small integers of both signs and observing costs
    ``0.1`` per coordinate along the first coordinate.  At least one recourse entry must
    be switched on, and ``h`` is chosen so that every single-entry policy
    meets the deterministic rows when ``x = 0``.
    """
    rng = np.random.default_rng(seed)
    hi = rng.integers(1, 3, n_xi).astype(float)
    lo = -rng.integers(0, 2, n_xi) * hi
    cut = rng.integers(-1, 2, n_xi).astype(float)
    base = UncertaintySet.box(lo, hi)
    A = np.vstack([base.A, cut])
    b = np.r_[base.b, float(np.sum(np.maximum(cut * lo, cut * hi)) - 0.5 * np.abs(cut).sum())]
    b[-1] = max(b[-1], float(cut @ lo))
    xi = UncertaintySet(A, b, np.ones(n_xi, dtype=bool))
    C = rng.integers(-2, 3, (n_xi, n_x)).astype(float)
    D = np.zeros((n_xi, n_xi))
    D[0] = 0.1
    Qm = rng.integers(-3, 4, (n_xi, n_y)).astype(float)
    T = rng.integers(0, 2, (n_rows, n_x)).astype(float)
    Wrec = rng.integers(0, 2, (n_rows, n_y)).astype(float)
    h = np.maximum(Wrec.max(axis=1), np.ceil(0.5 * (T.sum(axis=1) + Wrec.sum(axis=1))))
    budget = max(1, n_xi // 2) if budget is None else budget
    setW = BinaryFeasibleSet.cardinality(n_xi, budget, "<=")
    setY = BinaryFeasibleSet(n_y, ((np.ones(n_y), ">=", 1.0),))
    return DdidInstance.build(xi, n_x=n_x, n_y=n_y, C=C, D=D, Qm=Qm, T=T, Wrec=Wrec, h=h, setW=setW,
                              setY=setY, name=f"random-objective-{seed}",
                              metadata=dict(family="random", seed=seed))


def gen_random_constraint_instance(seed: int, n_xi: int = 2, n_y: int = 2, n_rows: int = 2) -> DdidInstance:
    """Random instance with an uncertain right-hand side and a constant coordinate.

    The recourse ``y = 1`` entries always satisfy the rows, so every instance is
    feasible at K = 1.
    """
    rng = np.random.default_rng(seed)
    n = n_xi + 1
    xi = UncertaintySet.box(np.r_[-np.ones(n_xi), 1.0], np.ones(n),
                            observable_mask=np.r_[np.ones(n_xi, bool), False])
    Qm = np.zeros((n, n_y))
    Qm[:n_xi] = rng.integers(-2, 3, (n_xi, n_y))
    Qm[n_xi] = rng.integers(0, 3, n_y)
    D = np.zeros((n, n))
    D[n_xi, :n_xi] = rng.uniform(0.1, 0.6, n_xi).round(2)
    Wrec = -rng.integers(1, 3, (n_rows, n_y)).astype(float)
    H = np.zeros((n_rows, n))
    H[:, :n_xi] = rng.integers(-1, 2, (n_rows, n_xi))
    # the all-ones policy meets every row: Wrec @ 1 <= H xi for all xi in the box
    H[:, n_xi] = Wrec.sum(axis=1) + np.abs(H[:, :n_xi]).sum(axis=1) + 0.5 * rng.integers(0, 2, n_rows)
    return DdidInstance.build(xi, n_x=0, n_y=n_y, Qm=Qm, D=D, Wrec=Wrec, H=H,
                              name=f"random-constraint-{seed}", metadata=dict(family="random", seed=seed))


def gen_random_multistage_instance(seed: int, T: int = 3, n_xi: int = 2, n_y: int = 2,
                                   budget: Optional[int] = None):
    """Random multi-period instance with objective uncertainty.

    Coordinates are ``n_xi`` observable box parameters followed by a constant
    1.  Observing a coordinate in period ``t`` costs ``0.05 * t`` plus a
    random surcharge, charged through the constant coordinate on the
    cumulative plan ``w^t``.  Each period picks at least one of ``n_y``
    recourse entries with small integer costs of both signs.  One harmless
    row keeps the deterministic constraints non-empty.
    """
    from .multistage import MultistageInstance

    rng = np.random.default_rng(seed)
    n = n_xi + 1
    hi = rng.integers(1, 3, n_xi).astype(float)
    lo = -rng.integers(0, 2, n_xi) * hi
    xi = UncertaintySet.box(np.r_[lo, 1.0], np.r_[hi, 1.0], observable_mask=np.r_[np.ones(n_xi, bool), False])
    Ds, Qs, Vs, Ws, setW, setY = [], [], [], [], [], []
    budget = max(1, n_xi // 2) if budget is None else budget
    for t in range(T):
        D = np.zeros((n, n))
        D[n_xi, :n_xi] = (0.05 * (t + 1) + rng.uniform(0.0, 0.1, n_xi)).round(2)
        Q = np.zeros((n, n_y))
        Q[:n_xi] = rng.integers(-3, 4, (n_xi, n_y))
        Ds.append(D)
        Qs.append(Q)
        Vs.append(np.zeros((1, n)))
        Ws.append(np.zeros((1, n_y)))
        setW.append(BinaryFeasibleSet.cardinality(n, budget, "<=").with_zeros([n_xi]))
        setY.append(BinaryFeasibleSet(n_y, ((np.ones(n_y), ">=", 1.0),)))
    return MultistageInstance(xi=xi, D=tuple(Ds), Q=tuple(Qs), V=tuple(Vs), W=tuple(Ws), h=np.ones(1),
                              setW=tuple(setW), setY=tuple(setY), w0=np.zeros(n),
                              name=f"random-multistage-{seed}", metadata=dict(family="random", seed=seed, T=T))
