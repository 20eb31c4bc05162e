"""Multi-stage K-adaptability with objective uncertainty.

In period ``t`` the decision maker picks one of ``K`` pre-committed pairs
``(w^{t,k}, y^{t,k})`` after seeing the coordinates observed so far.  The
observation plan ``w`` can only grow along a branch.  The worst case of fixed
decisions is an LP over one scenario per node of the ``K``-ary tree of
choices, and dualizing it gives one multiplier block per node.  The model is
exponential in ``T`` (``K^T`` leaves), so a tree cap guards its size.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import _build
from .core import MAXIMIZE, MINIMIZE, BinaryFeasibleSet, DdidInstance, SolverOptions, UncertaintySet
from .milp import INF, LinExpr, MilpModel, solve_lp, solve_milp
from ._build import rounded as _r


@dataclass(frozen=True)
class MultistageInstance:
    """Per-period data ``D[t]``, ``Q[t]``, ``V[t]``, ``W[t]`` with shared ``h`` and uncertainty set."""

    xi: UncertaintySet
    D: tuple
    Q: tuple
    V: tuple
    W: tuple
    h: np.ndarray
    setW: tuple
    setY: tuple
    w0: np.ndarray
    sense: str = MINIMIZE
    name: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        N = self.xi.dim
        T = len(self.D)
        if T < 1:
            raise ValueError("at least one period is required")
        for nm in ("Q", "V", "W", "setW", "setY"):
            if len(getattr(self, nm)) != T:
                raise ValueError(f"{nm} must have one entry per period ({T})")
        h = np.array(self.h, dtype=float).reshape(-1)
        L = h.shape[0]
        Ds, Qs, Vs, Ws = [], [], [], []
        for t in range(T):
            Dt = np.array(self.D[t], dtype=float).reshape(N, N)
            Qt = np.array(self.Q[t], dtype=float).reshape(N, -1) if np.size(self.Q[t]) else np.zeros((N, 0))
            ny = Qt.shape[1]
            Vt = np.array(self.V[t], dtype=float).reshape(L, N)
            Wt = np.array(self.W[t], dtype=float).reshape(L, ny)
            if self.setW[t].dim != N or self.setY[t].dim != ny:
                raise ValueError(f"feasible sets of period {t + 1} have the wrong dimension")
            for a in (Dt, Qt, Vt, Wt):
                a.setflags(write=False)
            Ds.append(Dt), Qs.append(Qt), Vs.append(Vt), Ws.append(Wt)
        w0 = np.array(self.w0, dtype=float).reshape(-1)
        if w0.shape[0] != N or not np.all((w0 == 0) | (w0 == 1)):
            raise ValueError("w0 must be a 0/1 vector over the uncertain coordinates")
        if np.any(w0[~self.xi.observable_mask] > 0):
            raise ValueError("w0 observes a coordinate that is not observable")
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise ValueError("sense must be 'minimize' or 'maximize'")
        h.setflags(write=False)
        w0.setflags(write=False)
        for nm, v in (("D", Ds), ("Q", Qs), ("V", Vs), ("W", Ws)):
            object.__setattr__(self, nm, tuple(v))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "setW", tuple(self.setW))
        object.__setattr__(self, "setY", tuple(self.setY))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def T(self) -> int:
        return len(self.D)

    @property
    def n_xi(self) -> int:
        return self.xi.dim

    @property
    def L(self) -> int:
        return self.h.shape[0]

    def n_y(self, t: int) -> int:
        return self.Q[t].shape[1]

    def canonical(self) -> "MultistageInstance":
        if self.sense == MINIMIZE:
            return self
        return _replace(self, D=tuple(-d for d in self.D), Q=tuple(-q for q in self.Q), sense=MINIMIZE,
                        metadata=dict(self.metadata, original_sense=MAXIMIZE))

    def path_cost(self, ws, ys, path) -> np.ndarray:
        """Cost vector on the final scenario for the choice ``path = (k_1, ..., k_T)``."""
        c = np.zeros(self.n_xi)
        for t, k in enumerate(path):
            c = c + self.D[t] @ ws[t][k] + self.Q[t] @ ys[t][k]
        return c


def _replace(ms, **kw):
    import dataclasses

    return dataclasses.replace(ms, **kw)


def multistage_from_two_stage(inst: DdidInstance) -> MultistageInstance:
    """Two-period instance equivalent to a two-stage objective-uncertainty instance.

    Period 1 chooses the observation plan ``w`` and the first-stage ``x`` (as
    its ``y``); period 2 chooses the recourse.  The second-period plan has no
    cost and no effect, and is free beyond monotonicity.
    """
    if inst.rhs_mode != "constant":
        raise ValueError("only constant right-hand sides have a multi-stage counterpart here")
    N, L = inst.n_xi, inst.L
    free_w = BinaryFeasibleSet.free(N).with_zeros(np.flatnonzero(~inst.xi.observable_mask))
    return MultistageInstance(
        xi=inst.xi, D=(inst.D, np.zeros((N, N))), Q=(inst.C, inst.Qm),
        V=(inst.V, np.zeros((L, N))), W=(inst.T, inst.Wrec), h=inst.h,
        setW=(inst.setW, free_w), setY=(inst.setX, inst.setY), w0=np.zeros(N), sense=inst.sense,
        name=f"{inst.name}-T2" if inst.name else "two-stage-T2",
    )


# ---------------------------------------------------------------------------
# model


def _nodes(K: int, t: int) -> list:
    return list(itertools.product(range(K), repeat=t))


def build_multistage_kadapt(ms: MultistageInstance, K: int, opts: Optional[SolverOptions] = None,
                            fixed: Optional[dict] = None) -> MilpModel:
    """Mixed-binary reformulation of the multi-stage K-adaptability problem.

    ``ms`` must be in minimization form.  Groups ``w[t]`` (``K x N``) and
    ``y[t]`` (``K x n_y(t)``) hold the policy variables.  ``fixed`` may give
    ``w`` and ``y`` as per-period ``K x dim`` arrays.
    """
    if ms.sense != MINIMIZE:
        raise ValueError("build_multistage_kadapt expects a minimization instance (use .canonical())")
    if K < 1:
        raise ValueError("K must be at least 1")
    opts = _build.options(opts)
    T, N, L = ms.T, ms.n_xi, ms.L
    if K ** T > opts.tree_cap:
        raise ValueError(f"K^T = {K ** T} leaves exceed the tree cap {opts.tree_cap}")
    A, b = ms.xi.A, ms.xi.b
    R = A.shape[0]
    M = opts.big_M if opts.big_M is not None else _default_m(ms)
    obs = ms.xi.observable_mask
    m = MilpModel(f"multistage_K{K}_T{T}")
    W, Y = [], []
    for t in range(T):
        wt = m.add_vars(f"w{t + 1}", (K, N), binary=True, group=f"w{t + 1}")
        yt = m.add_vars(f"y{t + 1}", (K, ms.n_y(t)), binary=True, group=f"y{t + 1}")
        for k in range(K):
            for i in np.flatnonzero(~obs):
                m.fix(int(wt[k, i]), 0.0)
            _build.add_set_rows(m, wt[k], ms.setW[t], f"W{t + 1}.{k}")
            _build.add_set_rows(m, yt[k], ms.setY[t], f"Y{t + 1}.{k}")
        W.append(wt)
        Y.append(yt)
    # information only grows along a branch; period one starts from w0
    for k in range(K):
        for i in range(N):
            if ms.w0[i] > 0:
                m.add_constr({int(W[0][k, i]): 1.0}, ">=", 1.0)
    for t in range(1, T):
        for k in range(K):
            for kp in range(K):
                for i in np.flatnonzero(obs):
                    m.add_constr({int(W[t][k, i]): 1.0, int(W[t - 1][kp, i]): -1.0}, ">=", 0.0)
    for k in range(1, K):
        for i in np.flatnonzero(obs):
            m.add_constr({int(W[0][k, i]): 1.0, int(W[0][0, i]): -1.0}, "==", 0.0)
    for path in _nodes(K, T):
        for l in range(L):
            expr = LinExpr()
            for t, k in enumerate(path):
                expr.add_dot(W[t][k], ms.V[t][l]).add_dot(Y[t][k], ms.W[t][l])
            m.add_constr(expr, "<=", float(ms.h[l]))

    leaves = _nodes(K, T)
    alpha = {p: m.add_var(f"alpha[{','.join(map(str, p))}]", 0.0, 1.0) for p in leaves}
    m.add_constr(LinExpr({v: 1.0 for v in alpha.values()}), "==", 1.0)
    beta, gamma = {}, {}
    for t in range(1, T + 1):
        for node in _nodes(K, t):
            tag = ",".join(map(str, node))
            beta[node] = m.add_vars(f"beta{t}[{tag}]", R, 0.0, INF)
            if t >= 2:
                gamma[node] = {int(i): m.add_var(f"gamma{t}[{tag}][{i}]", -M, M) for i in np.flatnonzero(obs)}

    def w_gamma(wvars, node):
        """Linearized ``w o gamma[node]`` as a dict coordinate -> product id."""
        return {i: m.product(int(wvars[i]), g) for i, g in gamma[node].items()}

    for t in range(1, T + 1):
        for node in _nodes(K, t):
            rows = [LinExpr().add_dot(beta[node], A[:, i]) for i in range(N)]
            if t >= 2:
                for i, p in w_gamma(W[t - 2][node[-2]], node).items():
                    rows[i].add(p, 1.0)
            if t < T:
                for kn in range(K):
                    child = node + (kn,)
                    for i, p in w_gamma(W[t - 1][node[-1]], child).items():
                        rows[i].add(p, -1.0)
            else:
                a = alpha[node]
                for s, k in enumerate(node):
                    for j in _build.nonzero_cols(ms.D[s]):
                        if obs[j]:
                            p = m.product(int(W[s][k, j]), a)
                            for i in np.flatnonzero(ms.D[s][:, j]):
                                rows[i].add(p, -ms.D[s][i, j])
                    for j in _build.nonzero_cols(ms.Q[s]):
                        p = m.product(int(Y[s][k, j]), a)
                        for i in np.flatnonzero(ms.Q[s][:, j]):
                            rows[i].add(p, -ms.Q[s][i, j])
            for i in range(N):
                m.add_constr(rows[i], "==", 0.0)
    obj = LinExpr()
    for node, bv in beta.items():
        obj.add_dot(bv, b)
    m.set_objective(obj)
    m.meta.update(K=K, T=T, big_M=M, big_m_vars=[g for d in gamma.values() for g in d.values()])
    if fixed:
        for key, group in (("w", "w"), ("y", "y")):
            if fixed.get(key) is None:
                continue
            for t, arr in enumerate(fixed[key]):
                ids = m.groups[f"{group}{t + 1}"]
                vals = np.asarray(arr, float).reshape(ids.shape)
                for j, v in zip(ids.ravel(), vals.ravel()):
                    if m.ub[int(j)] < v:
                        raise ValueError(f"cannot fix {m.var_names[int(j)]} to {v}")
                    m.fix(int(j), float(v))
    return m


def _default_m(ms: MultistageInstance) -> float:
    from .core import max_coordinate_range

    blocks = list(ms.D) + list(ms.Q) + [ms.xi.b]
    biggest = max((float(np.max(np.abs(a))) for a in blocks if np.size(a)), default=1.0)
    return 10.0 * ms.T * max(biggest, 1.0) * (1.0 + max_coordinate_range(ms.xi))


@dataclass
class MultistageSolution:
    status: str
    value: float
    w: Optional[list] = None
    y: Optional[list] = None
    K: int = 0
    info: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return 0 if self.w is None else len(self.w)

    def policy_tree(self) -> dict:
        """Nested policy tree: ``children[k]`` is the choice ``k`` in the next period."""

        def node(t):
            out = {}
            for k in range(self.K):
                entry = {"w": np.asarray(self.w[t][k]).tolist(), "y": np.asarray(self.y[t][k]).tolist()}
                if t + 1 < self.T:
                    entry["children"] = node(t + 1)
                out[str(k + 1)] = entry
            return out

        tree = node(0) if self.w is not None else {}
        return {"status": self.status, "value": _num(self.value), "K": self.K, "T": self.T, "tree": tree}

    def to_json(self, path=None, indent: int = 2) -> str:
        text = json.dumps(self.policy_tree(), indent=indent)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    def branches_monotone(self) -> bool:
        """Whether every branch has componentwise non-decreasing information."""
        for t in range(1, self.T):
            for k in range(self.K):
                for kp in range(self.K):
                    if np.any(np.asarray(self.w[t][k]) < np.asarray(self.w[t - 1][kp])):
                        return False
        return True


def _num(v):
    from .solution import _num as n

    return n(v)


def solve_multistage(ms: MultistageInstance, K: int, opts: Optional[SolverOptions] = None,
                     fixed: Optional[dict] = None) -> MultistageSolution:
    """Solve the multi-stage K-adaptability problem; the value is in the instance's sense.

    The returned policies are re-evaluated with the scenario-tree LP and that
    exact value is reported.  When it is below the MILP value the big-M bound
    was binding, and the model is rebuilt with ``10 * M`` (at most
    ``opts.max_big_m_retries`` times unless ``opts.big_M`` is set).
    """
    opts = _build.options(opts)
    can = ms.canonical()
    flip = -1.0 if ms.sense == MAXIMIZE else 1.0
    M = opts.big_M if opts.big_M is not None else _default_m(can)
    retries = 0
    while True:
        m = build_multistage_kadapt(can, K, opts.replace(big_M=M), fixed)
        sol = solve_milp(m, opts)
        if sol.primal is None:
            break
        ws = [_r(sol[m.groups[f"w{t + 1}"]]) for t in range(ms.T)]
        ys = [_r(sol[m.groups[f"y{t + 1}"]]) for t in range(ms.T)]
        exact = evaluate_multistage_fixed(can, ws, ys, opts)
        binding = exact < sol.value - 1e-6 * (1.0 + abs(exact))
        if not binding or opts.big_M is not None or retries >= opts.max_big_m_retries:
            break
        M *= 10.0
        retries += 1
    info = dict(nodes=sol.nodes, gap=sol.gap, seconds=sol.seconds, big_M=M, big_m_retries=retries,
                n_vars=m.n_vars, n_rows=m.n_rows, engine=sol.engine)
    if sol.primal is None:
        return MultistageSolution(str(sol.status), flip * math.inf, K=K, info=info)
    info["big_m_binding"] = bool(binding)
    info["milp_value"] = flip * sol.value + 0.0
    return MultistageSolution(str(sol.status), flip * exact + 0.0, ws, ys, K, info)


def evaluate_multistage_fixed(ms: MultistageInstance, ws, ys, opts: Optional[SolverOptions] = None,
                              engine: Optional[str] = None) -> float:
    """Worst-case cost of fixed per-period policies, by the lifted scenario-tree LP.

    One scenario per tree node; a child's scenario agrees with its parent's on
    the coordinates observed by the parent's plan.  Returns ``+inf`` (or
    ``-inf`` for maximization) when some path breaks the deterministic rows.
    """
    can = ms.canonical()
    flip = -1.0 if ms.sense == MAXIMIZE else 1.0
    K = len(ws[0])
    T, N = can.T, can.n_xi
    for path in _nodes(K, T):
        lhs = sum(can.V[t] @ np.asarray(ws[t][k], float) + can.W[t] @ np.asarray(ys[t][k], float)
                  for t, k in enumerate(path))
        if np.any(lhs > can.h + 1e-9):
            return flip * math.inf
    A, b = can.xi.A, can.xi.b
    m = MilpModel("multistage_eval")
    tau = m.add_var("tau", -INF, INF)
    xi = {}
    for t in range(1, T + 1):
        for node in _nodes(K, t):
            xi[node] = m.add_vars(f"xi{t}", N, -INF, INF)
            for r in range(len(b)):
                m.add_constr(LinExpr().add_dot(xi[node], A[r]), "<=", float(b[r]))
            if t >= 2:
                wv = np.asarray(ws[t - 2][node[-2]], float)
                for i in np.flatnonzero(wv > 0.5):
                    m.add_constr({int(xi[node][i]): 1.0, int(xi[node[:-1]][i]): -1.0}, "==", 0.0)
    for path in _nodes(K, T):
        c = can.path_cost(ws, ys, path)
        m.add_constr(LinExpr({tau: 1.0}).add_dot(xi[path], -c), "<=", 0.0)
    m.set_objective({tau: -1.0})
    res = solve_lp(m, opts, engine)
    if res.status != "Optimal":
        raise RuntimeError(f"evaluation LP ended with status {res.status}")
    return flip * (-res.value) + 0.0
