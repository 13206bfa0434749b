"""Worst case ``max_{delta in U} s^T delta`` over a smooth set.

Two independent routes:

* :func:`worst_case_lp` solves the primal LP with metric-closure difference rows,
* :func:`worst_case_flow` solves the dual uncapacitated min-cost flow by
  successive shortest paths and recovers ``delta*`` from node potentials.

Flow convention: node imbalance is ``inflow - outflow = b``, with ``b_j = s_j`` at
vertex ``j`` and ``-sum(s)`` at the dummy ``d``.  Substituting ``delta = lower + u``
makes every arc cost nonnegative:

* edge arc ``(k, j)`` (both orientations of each graph edge): ``gamma_kj + lower_k - lower_j``,
* dummy arc ``(d, j)``: ``upper_j - lower_j`` (carries ``u_j <= upper_j - lower_j``),
* dummy arc ``(j, d)``: ``0`` (carries ``u_j >= 0``).

Optimal potentials ``pi`` (``pi_v - pi_u <= cost_uv``) give ``u_j = pi_j - pi_d``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import DimensionError, OracleMismatchError, SolverError
from .lp import LinearProgram, LPOptions, solve_lp
from .sets import SmoothSet

log = logging.getLogger(__name__)

COST_TOL = 1e-12
VALUE_TOL = 1e-8


def _coef(s: SmoothSet, coef) -> np.ndarray:
    v = np.asarray(coef, dtype=float).reshape(-1)
    if v.size != s.n:
        raise DimensionError(f"coefficient vector has length {v.size}, set dimension is {s.n}")
    return v


@dataclass(frozen=True)
class WorstCase:
    value: float
    delta: np.ndarray


# ---------------------------------------------------------------------------
# LP route


def closure_lp(s: SmoothSet, coef) -> LinearProgram:
    """``min -coef^T delta`` over closure rows ``delta_k - delta_j <= dist(k,j)`` and projection bounds."""
    n = s.n
    k, j = np.nonzero(np.isfinite(s.dist) & ~np.eye(n, dtype=bool))
    rows = np.repeat(np.arange(k.size), 2)
    cols = np.column_stack([k, j]).reshape(-1)
    vals = np.tile([1.0, -1.0], k.size)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(k.size, n))
    return LinearProgram(-_coef(s, coef), A, np.full(k.size, "<="), s.dist[k, j], s.lower, s.upper)


def worst_case_lp(s: SmoothSet, coef, backend: str = "auto", opts: LPOptions | None = None) -> WorstCase:
    v = _coef(s, coef)
    if not np.any(v):
        return WorstCase(0.0, s.lower.copy())
    sol = solve_lp(closure_lp(s, v), opts, backend)
    if not sol.ok:
        raise SolverError(f"adversarial LP ended with status {sol.status}", sol.status)
    delta = np.clip(sol.x, s.lower, s.upper)
    return WorstCase(float(v @ delta), delta)


# ---------------------------------------------------------------------------
# flow route


@dataclass(frozen=True)
class FlowNetwork:
    n_nodes: int              # vertices 0..n-1 plus the dummy n
    tail: np.ndarray
    head: np.ndarray
    cost: np.ndarray
    imbalance: np.ndarray     # inflow - outflow
    constant: float           # sum_j lower_j s_j
    lower: np.ndarray

    @property
    def dummy(self) -> int:
        return self.n_nodes - 1

    @property
    def n_arcs(self) -> int:
        return self.tail.size

    def to_dimacs(self) -> str:
        cap = max(1.0, float(np.abs(self.imbalance).sum()))
        out = [f"c smooth-set adversarial flow, constant {self.constant!r}",
               f"p min {self.n_nodes} {self.n_arcs}"]
        out += [f"n {v + 1} {-self.imbalance[v]!r}" for v in np.flatnonzero(self.imbalance)]
        out += [f"a {u + 1} {w + 1} 0 {cap!r} {c!r}" for u, w, c in zip(self.tail, self.head, self.cost)]
        return "\n".join(out) + "\n"

    def write_dimacs(self, path) -> None:
        Path(path).write_text(self.to_dimacs())


def build_flow_network(s: SmoothSet, coef) -> FlowNetwork:
    v = _coef(s, coef)
    n = s.n
    lo, hi = s.lower, s.upper
    e = s.graph.edges
    gam = s.graph.edge_gamma
    k = np.concatenate([e[:, 0], e[:, 1]])
    j = np.concatenate([e[:, 1], e[:, 0]])
    ce = np.concatenate([gam, gam]) + lo[k] - lo[j]
    verts = np.arange(n)
    tail = np.concatenate([k, np.full(n, n), verts])
    head = np.concatenate([j, verts, np.full(n, n)])
    cost = np.concatenate([ce, hi - lo, np.zeros(n)])
    scale = 1.0 + np.max(np.abs(np.concatenate([gam, lo, hi])), initial=0.0)
    neg = cost < 0
    if np.any(cost < -COST_TOL * scale):
        raise SolverError(f"rewritten arc cost {cost.min()!r} is negative; set data inconsistent")
    if np.any(neg):
        log.debug("clamping %d rounding-negative arc costs (min %r) to 0", int(neg.sum()), float(cost.min()))
        cost = np.where(neg, 0.0, cost)
    return FlowNetwork(n + 1, tail, head, cost, np.append(v, -v.sum()), float(lo @ v), lo.copy())


@dataclass(frozen=True)
class FlowResult:
    flow: np.ndarray          # per arc of the network
    potentials: np.ndarray    # reduced costs c_uv + pi_u - pi_v >= 0 on residual arcs
    cost: float
    augmentations: int


def _dijkstra_dense(rc: np.ndarray, src: int) -> tuple[np.ndarray, np.ndarray]:
    V = rc.shape[0]
    dist = np.full(V, np.inf)
    pred = np.full(V, -1)
    done = np.zeros(V, dtype=bool)
    dist[src] = 0.0
    for _ in range(V):
        cand = np.where(done, np.inf, dist)
        u = int(np.argmin(cand))
        if not np.isfinite(cand[u]):
            break
        done[u] = True
        nd = dist[u] + rc[u]
        better = (nd < dist) & ~done
        dist[better] = nd[better]
        pred[better] = u
    return dist, pred


def min_cost_flow(net: FlowNetwork, max_augment: int | None = None) -> FlowResult:
    """Uncapacitated min-cost flow by successive shortest paths with node potentials."""
    V = net.n_nodes
    if np.any(net.cost < 0):
        raise SolverError("successive shortest paths needs nonnegative arc costs")
    cost = np.full((V, V), np.inf)
    cost[net.tail, net.head] = net.cost
    Z = np.zeros((V, V))
    excess = -net.imbalance.astype(float)
    tol = 1e-12 * max(1.0, float(np.abs(excess).max(initial=0.0)))
    residual = 1e-9 * max(1.0, float(np.abs(excess).sum()))
    if abs(excess.sum()) > residual:
        raise SolverError("network imbalances do not sum to zero")
    pi = np.zeros(V)
    aug = 0
    cap = max_augment if max_augment is not None else 4 * V * V + 10
    while True:
        src = np.flatnonzero(excess > tol)
        if src.size == 0:
            break
        if aug >= cap:
            raise SolverError("successive shortest paths exceeded the augmentation cap")
        src = int(src[np.argmax(excess[src])])
        back = np.where(Z.T > 0.0, -cost.T, np.inf)
        use_back = back < cost
        res = np.where(use_back, back, cost)
        rc = res + pi[:, None] - pi[None, :]
        rc = np.where(np.isfinite(rc), np.maximum(rc, 0.0), np.inf)
        dist, pred = _dijkstra_dense(rc, src)
        sinks = np.flatnonzero((excess < -tol) & np.isfinite(dist))
        if sinks.size == 0:
            if excess[src] <= residual:
                break   # rounding leftover of the balance
            raise SolverError("supply cannot be routed to any demand node")
        t = int(sinks[np.argmin(dist[sinks])])
        path = []
        w = t
        while w != src:
            u = int(pred[w])
            path.append((u, w))
            w = u
        amount = min(excess[src], -excess[t])
        for u, w in path:
            if use_back[u, w]:
                amount = min(amount, Z[w, u])
        for u, w in path:
            if use_back[u, w]:
                Z[w, u] -= amount
                if Z[w, u] <= tol:
                    Z[w, u] = 0.0
            else:
                Z[u, w] += amount
        excess[src] -= amount
        excess[t] += amount
        pi = pi + np.where(np.isfinite(dist), dist, dist[t])
        aug += 1
    flow = Z[net.tail, net.head]
    return FlowResult(flow, pi, float(net.cost @ flow), aug)


def reduced_costs(net: FlowNetwork, potentials: np.ndarray) -> np.ndarray:
    return net.cost + potentials[net.tail] - potentials[net.head]


def worst_case_flow(s: SmoothSet, coef, dimacs_path=None) -> WorstCase:
    v = _coef(s, coef)
    net = build_flow_network(s, v)
    if dimacs_path is not None:
        net.write_dimacs(dimacs_path)
    res = min_cost_flow(net)
    value = res.cost + net.constant
    pi = res.potentials
    delta = np.clip(s.lower + (pi[:-1] - pi[net.dummy]), s.lower, s.upper)
    got = float(v @ delta)
    if abs(got - value) > VALUE_TOL * (1.0 + abs(value)) or not s.contains(delta, 1e-7):
        raise OracleMismatchError(f"recovered scenario gives {got!r}, flow value is {value!r}")
    return WorstCase(float(value), delta)


# ---------------------------------------------------------------------------
# dispatch


ORACLES = {"flow": worst_case_flow, "lp": worst_case_lp}


def worst_case(s: SmoothSet, coef, method: str = "flow") -> WorstCase:
    try:
        fn = ORACLES[method]
    except KeyError:
        raise ValueError(f"unknown oracle {method!r}") from None
    return fn(s, coef)


def worst_case_batch(s: SmoothSet, coefs, method: str = "flow") -> tuple[np.ndarray, np.ndarray]:
    """Values and argmax scenarios for each row of ``coefs``."""
    coefs = np.atleast_2d(np.asarray(coefs, dtype=float))
    out = [worst_case(s, row, method) for row in coefs]
    return np.array([w.value for w in out]), np.array([w.delta for w in out]).reshape(len(out), s.n)
