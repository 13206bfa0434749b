"""Robust LP solvers over smooth sets behind one driver.

* ``dualize``: the full dual reformulation,
* ``compact``: sign-pattern rows where admissible, dual blocks elsewhere,
* ``colgen``: the dual reformulation with per-constraint column generation over set rows,
* ``cutgen``: scenario cutting planes with the adversarial oracle as separator.
"""

from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .adversarial import worst_case
from .errors import SolverError
from .lp import INFEASIBLE, LE, OPTIMAL, LPOptions, LPSolution, solve_lp
from .model import MIXED, RobustLP, model_patterns, require_continuous, validate
from .reformulate import (COMPACT_FIRST, DUALIZE_ALL, add_dual_block, auto_reformulate, base_builder)
from .sets import SmoothSet, constraint_rows

METHODS = ("auto", "compact", "dualize", "colgen", "cutgen")


@dataclass
class SolverOptions:
    backend: str = "auto"
    lp: LPOptions = field(default_factory=LPOptions)
    eps_viol: float = 1e-7
    max_rounds: int = 500
    max_add_per_round: int | None = None
    oracle: str = "flow"
    dense_ratio: float = 2.0


@dataclass
class SolveResult:
    status: str
    objective: float
    x: np.ndarray | None
    y: np.ndarray | None
    method: str
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def stats_json(self) -> str:
        return json.dumps(self.stats, default=float)


def _prepare(model: RobustLP, set_: SmoothSet) -> None:
    require_continuous(model)
    validate(model, set_).raise_errors()


def _finish(sol: LPSolution, n_x: int, n_y: int, method: str, stats: dict) -> SolveResult:
    stats.setdefault("lp_status", sol.status)
    if not sol.ok:
        return SolveResult(sol.status, math.nan, None, None, method, stats)
    z = sol.x
    return SolveResult(OPTIMAL, float(sol.objective), z[:n_x].copy(), z[n_x:n_x + n_y].copy(), method, stats)


def _solve_reformulated(model, set_, strategy, method, opts) -> SolveResult:
    t0 = time.perf_counter()
    ref = auto_reformulate(model, set_, strategy)
    sol = solve_lp(ref.lp, opts.lp, opts.backend)
    stats = {"method": method, "time": time.perf_counter() - t0, "vars": ref.lp.n_vars,
             "cons": ref.lp.n_rows, "dual_vars": ref.n_dual_vars,
             "rules": [p["rule"] for p in ref.provenance]}
    return _finish(sol, model.n_x, model.n_y, method, stats)


def solve_dualization(model: RobustLP, set_: SmoothSet, opts: SolverOptions | None = None) -> SolveResult:
    _prepare(model, set_)
    return _solve_reformulated(model, set_, DUALIZE_ALL, "dualize", opts or SolverOptions())


def solve_compact(model: RobustLP, set_: SmoothSet, opts: SolverOptions | None = None) -> SolveResult:
    _prepare(model, set_)
    return _solve_reformulated(model, set_, COMPACT_FIRST, "compact", opts or SolverOptions())


# ---------------------------------------------------------------------------
# column generation


def graph_center(set_: SmoothSet, component: np.ndarray) -> int:
    """Vertex of ``component`` with minimum eccentricity under closure distances (lowest index on ties)."""
    sub = set_.dist[np.ix_(component, component)]
    ecc = sub.max(axis=1)
    return int(component[int(np.argmin(ecc))])


def _components(set_: SmoothSet) -> list[np.ndarray]:
    reach = np.isfinite(set_.dist)
    seen = np.zeros(set_.n, dtype=bool)
    out = []
    for v in range(set_.n):
        if not seen[v]:
            comp = np.flatnonzero(reach[v])
            seen[comp] = True
            out.append(comp)
    return out


def shortest_path_tree(set_: SmoothSet) -> np.ndarray:
    """Indices (into the stored edge list) of a shortest-path forest rooted at each component center."""
    g = set_.graph
    adj: list[list[tuple[int, float, int]]] = [[] for _ in range(g.n)]
    for e, ((i, j), w) in enumerate(zip(g.edges, g.edge_gamma)):
        adj[i].append((int(j), float(w), e))
        adj[j].append((int(i), float(w), e))
    tree = []
    for comp in _components(set_):
        root = graph_center(set_, comp)
        dist = {root: 0.0}
        parent: dict[int, int] = {}
        done = set()
        heap = [(0.0, root)]
        while heap:
            du, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if u in parent:
                tree.append(parent[u])
            for v, w, e in adj[u]:
                nd = du + w
                if v not in done and nd < dist.get(v, math.inf):
                    dist[v] = nd
                    parent[v] = e
                    heapq.heappush(heap, (nd, v))
    return np.array(sorted(tree), dtype=np.int64)


def initial_columns(set_: SmoothSet) -> np.ndarray:
    """All ``2n`` vertex rows plus both orientations of the shortest-path-tree edges."""
    n = set_.n
    tree = shortest_path_tree(set_)
    return np.concatenate([np.arange(2 * n), 2 * n + np.column_stack([2 * tree, 2 * tree + 1]).reshape(-1)])


@dataclass
class ColGenState:
    active: list                      # per-constraint sorted arrays of set-row indices
    rounds: int = 0
    log: list = field(default_factory=list)
    master: LPSolution | None = None

    def grow(self, i: int, new: np.ndarray) -> None:
        self.active[i] = np.union1d(self.active[i], new)


def solve_colgen(model: RobustLP, set_: SmoothSet, opts: SolverOptions | None = None) -> SolveResult:
    _prepare(model, set_)
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    A_set, b_set = constraint_rows(set_, as_sparse=True)
    L = A_set.shape[0]
    start = initial_columns(set_)
    state = ColGenState([start.copy() for _ in range(model.m)])
    vars_start = int(sum(a.size for a in state.active))
    history = []
    fallbacks = 0
    while True:
        if state.rounds >= opts.max_rounds:
            raise SolverError("column generation exceeded the round cap")
        b, xi, yi = base_builder(model)
        blocks = [add_dual_block(b, model.C[i], model.d[i], model.c[i], xi, yi, A_set, b_set, state.active[i])
                  for i in range(model.m)]
        sol = solve_lp(b.build(), opts.lp, opts.backend)
        state.rounds += 1
        state.master = sol
        if sol.status == INFEASIBLE and any(a.size < L for a in state.active):
            # an infeasible restricted master yields no duals; open every column
            state.active = [np.arange(L) for _ in range(model.m)]
            fallbacks += 1
            state.log.append({"round": state.rounds, "added": "all (infeasible master)"})
            continue
        if not sol.ok:
            break
        history.append(float(sol.objective))
        added = 0
        for i, (_, eq, budget) in enumerate(blocks):
            mu = sol.duals[eq]
            sigma = sol.duals[budget]
            rc = -(A_set @ mu + b_set * sigma)
            cand = np.setdiff1d(np.flatnonzero(rc < -opts.eps_viol), state.active[i], assume_unique=True)
            if opts.max_add_per_round is not None and cand.size > opts.max_add_per_round:
                cand = cand[np.argsort(rc[cand], kind="stable")[:opts.max_add_per_round]]
            if cand.size:
                state.grow(i, cand)
                added += cand.size
        state.log.append({"round": state.rounds, "added": added})
        if added == 0:
            break
    final = int(sum(a.size for a in state.active))
    full = L * model.m
    stats = {"method": "colgen", "time": time.perf_counter() - t0, "rounds": state.rounds,
             "vars start": vars_start, "vars gen": final - vars_start, "vars final": final,
             "vars full": full, "generated fraction": final / full if full else 0.0,
             "infeasible fallbacks": fallbacks, "objective history": history}
    return _finish(state.master, model.n_x, model.n_y, "colgen", stats)


# ---------------------------------------------------------------------------
# cutting planes


@dataclass
class CutGenState:
    pools: list                       # per-constraint lists of scenarios
    rounds: int = 0
    log: list = field(default_factory=list)


def solve_cutgen(model: RobustLP, set_: SmoothSet, opts: SolverOptions | None = None) -> SolveResult:
    _prepare(model, set_)
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    # the nominal need not satisfy the edge bounds; the lower bound vector always does
    seed = set_.nominal if set_.contains(set_.nominal, 1e-9) else set_.lower
    state = CutGenState([[seed.copy()] for _ in range(model.m)])
    history = []
    cuts = 0
    while True:
        if state.rounds >= opts.max_rounds:
            raise SolverError("cutting planes exceeded the round cap")
        b, xi, yi = base_builder(model)
        cols = np.concatenate([xi, yi])
        for i in range(model.m):
            P = np.array(state.pools[i])
            Ax = np.asarray(model.C[i].T @ P.T).T
            coef = np.hstack([Ax, np.tile(model.d[i], (P.shape[0], 1))])
            r, k = np.nonzero(coef)
            b.add_rows(r, cols[k], coef[r, k], LE, np.full(P.shape[0], model.c[i]))
        sol = solve_lp(b.build(), opts.lp, opts.backend)
        state.rounds += 1
        if not sol.ok:
            break
        history.append(float(sol.objective))
        x, y = sol.x[:model.n_x], sol.x[model.n_x:model.n_x + model.n_y]
        added = 0
        worst = -math.inf
        for i in range(model.m):
            wc = worst_case(set_, model.coefficient(i, x), opts.oracle)
            omega = wc.value + float(model.d[i] @ y)
            excess = omega - model.c[i]
            worst = max(worst, excess)
            if excess > opts.eps_viol * (1.0 + abs(model.c[i])):
                if not set_.contains(wc.delta, 1e-7):
                    raise SolverError("adversarial scenario left the set")
                state.pools[i].append(wc.delta)
                added += 1
        cuts += added
        state.log.append({"round": state.rounds, "added": added, "max_excess": worst})
        if added == 0:
            break
    stats = {"method": "cutgen", "time": time.perf_counter() - t0, "rounds": state.rounds, "cuts": cuts,
             "pool sizes": [len(p) for p in state.pools], "objective history": history}
    return _finish(sol, model.n_x, model.n_y, "cutgen", stats)


# ---------------------------------------------------------------------------
# driver


def choose_method(model: RobustLP, set_: SmoothSet, opts: SolverOptions | None = None) -> str:
    opts = opts or SolverOptions()
    pats = model_patterns(model)
    if all(p is not None and p.kind != MIXED for p in pats):
        return "compact"
    if set_.graph.n_edges > opts.dense_ratio * set_.n:
        return "colgen"
    return "dualize"


_SOLVERS = {"compact": solve_compact, "dualize": solve_dualization, "colgen": solve_colgen,
            "cutgen": solve_cutgen}


def solve(model: RobustLP, set_: SmoothSet, method: str = "auto", opts: SolverOptions | None = None) -> SolveResult:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    chosen = choose_method(model, set_, opts) if method == "auto" else method
    res = _SOLVERS[chosen](model, set_, opts)
    res.stats["requested"] = method
    res.stats["chosen"] = chosen
    return res


def robust_violation(model: RobustLP, set_: SmoothSet, x, y, oracle: str = "flow") -> np.ndarray:
    """``max_delta delta^T C_i x + d_i^T y - c_i`` for every robust row."""
    return np.array([worst_case(set_, model.coefficient(i, x), oracle).value + float(model.d[i] @ y) - model.c[i]
                     for i in range(model.m)])

