"""Robust shortest path with arc times ``f_a = delta_a * f_hat_a`` under a smooth set on ``delta``.

Every arc coefficient is nonnegative, so the worst case of any path is attained at the
upper projection bound and the robust path is a plain shortest path on ``upper * f_hat``.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import sparse

from ..calibration import MaxBased, StdevBased, as_scenarios, gamma_from_scenarios
from ..errors import DimensionError, DomainError
from ..model import RobustLP
from ..sets import SmoothSet, build, complete_edges

SCHEMES = ("max", "stdev")


@dataclass(frozen=True, eq=False)
class ShortestPathInstance:
    """Directed graph with nominal arc times; ``edges`` index arc pairs of the uncertainty graph.

    ``edges=None`` means the complete graph over arcs, an empty array gives a box.
    """

    n_nodes: int
    tail: np.ndarray
    head: np.ndarray
    nominal: np.ndarray
    origin: int
    target: int
    scenarios: np.ndarray | None = None
    edges: np.ndarray | None = None
    scheme: str = "max"
    lam: float = 0.0
    lam2: float = 0.0

    def __post_init__(self):
        put = lambda k, v: object.__setattr__(self, k, v)
        put("tail", np.asarray(self.tail, dtype=np.int64).reshape(-1))
        put("head", np.asarray(self.head, dtype=np.int64).reshape(-1))
        put("nominal", np.asarray(self.nominal, dtype=float).reshape(-1))
        na = self.tail.size
        if self.head.size != na or self.nominal.size != na:
            raise DimensionError("tail, head and nominal must have one entry per arc")
        if na and (min(self.tail.min(), self.head.min()) < 0 or max(self.tail.max(), self.head.max()) >= self.n_nodes):
            raise DimensionError("arc endpoint outside the node range")
        if not (0 <= self.origin < self.n_nodes and 0 <= self.target < self.n_nodes):
            raise DimensionError("origin or target outside the node range")
        if self.origin == self.target:
            raise DomainError("origin and target must differ")
        if np.any(self.nominal <= 0):
            raise DomainError("nominal arc times must be positive")
        if self.scenarios is not None:
            d = as_scenarios(self.scenarios)
            if d.shape[1] != na:
                raise DimensionError(f"scenario rows have {d.shape[1]} entries for {na} arcs")
            put("scenarios", d)
        if self.edges is not None:
            put("edges", np.asarray(self.edges, dtype=np.int64).reshape(-1, 2))
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    @property
    def n_arcs(self) -> int:
        return self.tail.size

    def uncertainty_edges(self) -> np.ndarray:
        if self.edges is None:
            return np.array(complete_edges(self.n_arcs), dtype=np.int64).reshape(-1, 2)
        return self.edges

    def with_training(self, D) -> "ShortestPathInstance":
        """Copy whose nominal times are the column means of ``D`` and whose scenarios are ``D``."""
        d = as_scenarios(D)
        return replace(self, nominal=d.mean(axis=0), scenarios=d)

    def to_dict(self) -> dict:
        return {"n_nodes": int(self.n_nodes), "tail": self.tail.tolist(), "head": self.head.tolist(),
                "nominal": self.nominal.tolist(), "origin": int(self.origin), "target": int(self.target)}

    @classmethod
    def from_dict(cls, data: dict, scenarios=None) -> "ShortestPathInstance":
        try:
            tail, head = data["tail"], data["head"]
            n_nodes, origin, target = int(data["n_nodes"]), int(data["origin"]), int(data["target"])
        except KeyError as exc:
            raise DomainError(f"graph description misses {exc.args[0]!r}") from None
        nominal = data.get("nominal")
        if nominal is None:
            if scenarios is None:
                raise DomainError("graph has no nominal times and no scenarios were given")
            nominal = as_scenarios(scenarios).mean(axis=0)
        return cls(n_nodes, tail, head, nominal, origin, target, scenarios)

    @classmethod
    def load(cls, path, scenarios=None) -> "ShortestPathInstance":
        return cls.from_dict(json.loads(Path(path).read_text()), scenarios)


def scheme_object(scheme: str, lam: float, lam2: float):
    if scheme == "max":
        return MaxBased(lam, lam2)
    if scheme == "stdev":
        return StdevBased(lam, lam2)
    raise DomainError(f"unknown scheme {scheme!r}")


def calibrated_set(inst: ShortestPathInstance) -> SmoothSet:
    """Smooth set on relative deviations calibrated from the instance scenarios."""
    if inst.scenarios is None:
        raise DomainError("instance carries no scenarios to calibrate from")
    g = gamma_from_scenarios(inst.scenarios, scheme_object(inst.scheme, inst.lam, inst.lam2),
                             inst.uncertainty_edges())
    return build(g)


def dijkstra(n_nodes: int, tail, head, weight, origin: int, target: int) -> tuple[np.ndarray, float]:
    """Arc indices of a shortest ``origin``-``target`` path and its length."""
    w = np.asarray(weight, dtype=float)
    if np.any(w < 0):
        a = int(np.flatnonzero(w < 0)[0])
        raise DomainError(f"arc {a} has negative weight {w[a]!r}")
    out: list[list[int]] = [[] for _ in range(n_nodes)]
    for a, u in enumerate(tail):
        out[int(u)].append(a)
    dist = np.full(n_nodes, math.inf)
    pred = np.full(n_nodes, -1, dtype=np.int64)
    dist[origin] = 0.0
    done = np.zeros(n_nodes, dtype=bool)
    heap = [(0.0, origin)]
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == target:
            break
        for a in out[u]:
            v = int(head[a])
            nd = du + w[a]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = a
                heapq.heappush(heap, (nd, v))
    if not np.isfinite(dist[target]):
        raise DomainError("target is unreachable from origin")
    path = []
    v = target
    while v != origin:
        a = int(pred[v])
        path.append(a)
        v = int(tail[a])
    return np.array(path[::-1], dtype=np.int64), float(dist[target])


def robust_weights(inst: ShortestPathInstance, set_: SmoothSet) -> np.ndarray:
    if set_.n != inst.n_arcs:
        raise DimensionError(f"set dimension {set_.n} differs from {inst.n_arcs} arcs")
    w = set_.upper * inst.nominal
    if np.any(w < 0):
        a = int(np.flatnonzero(w < 0)[0])
        raise DomainError(f"calibration gives a negative upper deviation {set_.upper[a]!r} on arc {a}")
    return w


def robust_shortest_path(inst: ShortestPathInstance, set_: SmoothSet | None = None) -> tuple[np.ndarray, float]:
    """Robust path and its worst-case length; the set is calibrated from the scenarios if omitted."""
    s = calibrated_set(inst) if set_ is None else set_
    return dijkstra(inst.n_nodes, inst.tail, inst.head, robust_weights(inst, s), inst.origin, inst.target)


def nominal_path(inst: ShortestPathInstance) -> tuple[np.ndarray, float]:
    return dijkstra(inst.n_nodes, inst.tail, inst.head, inst.nominal, inst.origin, inst.target)


def path_vector(inst: ShortestPathInstance, path) -> np.ndarray:
    x = np.zeros(inst.n_arcs)
    x[np.asarray(path, dtype=np.int64)] = 1.0
    return x


def incidence(inst: ShortestPathInstance) -> sparse.csr_matrix:
    """Node-arc matrix with ``+1`` at the tail and ``-1`` at the head."""
    a = np.arange(inst.n_arcs)
    rows = np.concatenate([inst.tail, inst.head])
    vals = np.concatenate([np.ones(inst.n_arcs), -np.ones(inst.n_arcs)])
    return sparse.csr_matrix((vals, (rows, np.concatenate([a, a]))), shape=(inst.n_nodes, inst.n_arcs))


def shortest_path_model(inst: ShortestPathInstance) -> RobustLP:
    """Epigraph LP ``min t`` s.t. ``delta^T diag(f_hat) x <= t`` over unit flows ``x in [0,1]``."""
    na = inst.n_arcs
    supply = np.zeros(inst.n_nodes)
    supply[inst.origin] = 1.0
    supply[inst.target] = -1.0
    return RobustLP(na, np.zeros(na), [1.0], (sparse.diags(inst.nominal).tocsr(),), [[-1.0]], [0.0],
                    F=incidence(inst), H=sparse.csr_matrix((inst.n_nodes, 1)), h=supply,
                    sense=np.full(inst.n_nodes, "="), x_lower=np.zeros(na), x_upper=np.ones(na),
                    y_lower=[0.0], y_upper=[np.inf], names=("path_time",))


# ---------------------------------------------------------------------------
# synthetic data


def synthetic_layered_instance(stages: int = 6, width: int = 4, scenarios: int = 200, seed: int = 0,
                               load: float = 0.8, step: float = 0.05, noise: float = 0.05,
                               spike_prob: float = 0.03, spike_scale: float = 2.0) -> ShortestPathInstance:
    """Series of ``stages`` with ``width`` parallel arcs each; faster arcs carry more congestion risk.

    Relative time of arc ``a`` (slot ``k`` of stage ``t``) in scenario ``s`` is
    ``1 + L_a (z_s + 0.5 e_st) + noise`` with centred gamma factors ``z`` (network wide) and
    ``e`` (per stage) and loading ``L_a`` decreasing in ``k``; independent incidents multiply
    single arcs by up to ``1 + spike_scale``.  Base times grow by ``step`` per slot.
    """
    rng = np.random.default_rng(seed)
    tail = np.repeat(np.arange(stages), width)
    head = tail + 1
    k = np.tile(np.arange(width), stages)
    base = 1.0 + step * k + 0.03 * rng.random(tail.size)
    L = load * (width - 1 - k) / max(width - 1, 1) * rng.uniform(0.7, 1.3, tail.size)
    z = rng.gamma(1.0, 0.5, size=(scenarios, 1)) - 0.5
    e = rng.gamma(1.0, 0.5, size=(scenarios, stages)) - 0.5
    rel = 1.0 + z * L + 0.5 * e[:, tail] * L + noise * rng.normal(size=(scenarios, tail.size))
    spikes = rng.random((scenarios, tail.size)) < spike_prob
    rel = rel * np.where(spikes, 1.0 + spike_scale * rng.random((scenarios, tail.size)), 1.0)
    D = base * np.maximum(rel, 0.2)
    return ShortestPathInstance(stages + 1, tail, head, D.mean(axis=0), 0, stages, D)


# ---------------------------------------------------------------------------
# train/test study

DEFAULT_LAM = (0.025, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6)
DEFAULT_LAM2 = (0.025, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5)
DEFAULT_STDEV_LAM = (1.0, 2.0, 3.0, 5.0, 7.0, 9.0, 11.0)


def default_settings(lam_grid=DEFAULT_LAM, lam2_grid=DEFAULT_LAM2, stdev_grid=DEFAULT_STDEV_LAM) -> list[dict]:
    """Smooth max-based over the ``(lam, lam2)`` grid plus the two box families."""
    out = [{"family": "smooth_max", "scheme": "max", "lam": l, "lam2": l2, "box": False}
           for l in lam_grid for l2 in lam2_grid]
    out += [{"family": "box_max", "scheme": "max", "lam": l, "lam2": 0.0, "box": True} for l in lam_grid]
    out += [{"family": "box_stdev", "scheme": "stdev", "lam": l, "lam2": 0.0, "box": True} for l in stdev_grid]
    return out


def split_indices(S: int, splits: int, train_frac: float, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    if not 0.0 < train_frac < 1.0:
        raise DomainError("train_frac must lie in (0, 1)")
    k = int(round(train_frac * S))
    if k < 2 or S - k < 1:
        raise DomainError(f"{S} scenarios are too few for a {train_frac} split")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(splits):
        perm = rng.permutation(S)
        out.append((np.sort(perm[:k]), np.sort(perm[k:])))
    return out


def nondominated(points: np.ndarray) -> np.ndarray:
    """Indices of points not weakly dominated by another (both coordinates minimized), sorted by the first."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    keep = []
    best = math.inf
    for i in order:
        if pts[i, 1] < best:
            keep.append(int(i))
            best = pts[i, 1]
    return np.array(keep, dtype=np.int64)


def hypervolume(points: np.ndarray, ref) -> float:
    """Area dominated by ``points`` and bounded by ``ref`` (both coordinates minimized)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    rx, ry = float(ref[0]), float(ref[1])
    pts = pts[(pts[:, 0] < rx) & (pts[:, 1] < ry)]
    if pts.size == 0:
        return 0.0
    front = pts[nondominated(pts)]
    area, prev_y = 0.0, ry
    for x, y in front:
        area += (rx - x) * (prev_y - y)
        prev_y = y
    return area


def shortest_path_study(inst: ShortestPathInstance, splits: int = 10, train_frac: float = 0.8, seed: int = 0,
                        settings: list[dict] | None = None) -> dict:
    """Out-of-sample (mean, max) path times per calibration setting, normalized by the nominal mean."""
    if inst.scenarios is None:
        raise DomainError("study needs scenarios")
    D = inst.scenarios
    settings = default_settings() if settings is None else settings
    complete = inst.uncertainty_edges()
    box = np.zeros((0, 2), dtype=np.int64)
    acc = np.zeros((len(settings), 2))
    for train, test in split_indices(D.shape[0], splits, train_frac, seed):
        tr = inst.with_training(D[train])
        Dt = D[test]
        p0, _ = nominal_path(tr)
        norm = float(np.mean(Dt[:, p0].sum(axis=1)))
        for k, st in enumerate(settings):
            sub = replace(tr, scheme=st["scheme"], lam=float(st["lam"]), lam2=float(st["lam2"]),
                          edges=box if st.get("box") else complete)
            path, _ = robust_shortest_path(sub)
            times = Dt[:, path].sum(axis=1) / norm
            acc[k] += (times.mean(), times.max())
    acc /= splits
    rows = [dict(st, mean=float(m), max=float(x)) for st, (m, x) in zip(settings, acc)]
    families = sorted({st["family"] for st in settings})
    ref = acc.max(axis=0) + 0.01
    fronts, hv = {}, {}
    for fam in families:
        idx = np.array([k for k, st in enumerate(settings) if st["family"] == fam])
        front = acc[idx][nondominated(acc[idx])]
        fronts[fam] = front.tolist()
        hv[fam] = hypervolume(front, ref)
    return {"splits": splits, "train_frac": train_frac, "seed": seed, "rows": rows,
            "frontiers": fronts, "reference": ref.tolist(), "hypervolume": hv}
