"""Smooth uncertainty sets and the comparison families (box, rotated box, ellipsoid).

A smooth set over ``n`` components is

    { delta : |delta_i - nominal_i| <= gamma_ii,  |delta_i - delta_j| <= gamma_ij for {i,j} in E }.

:func:`build` preprocesses a graph into a :class:`SmoothSet` holding the metric
closure of ``(V, E, gamma)`` and the per-coordinate projection bounds.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable

import jsonschema
import numpy as np
from scipy import sparse

from .errors import DimensionError, DomainError, EmptySetError
from .numerics import as_symmetric, cholesky, jacobi_eigh, max_eigenvalue, quad_form_diff

EMPTY_TOL = 1e-12
MEMBER_TOL = 1e-9


def complete_edges(n: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n), 2))


def path_edges(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


@dataclass(frozen=True)
class UncertaintyGraph:
    """Parameters ``(nominal, gamma_ii, E, gamma_ij)`` of a smooth set.

    Edges are stored canonically: ``i < j`` and sorted lexicographically, with
    ``edge_gamma[k]`` belonging to ``edges[k]``.
    """

    nominal: np.ndarray
    node_radii: np.ndarray
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    edge_gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        nominal = np.array(self.nominal, dtype=float).reshape(-1)
        radii = np.array(self.node_radii, dtype=float).reshape(-1)
        n = nominal.size
        if n == 0:
            raise DimensionError("uncertainty graph needs at least one vertex")
        if radii.size != n:
            raise DimensionError(f"{radii.size} node radii for {n} vertices")
        edges = np.array(self.edges, dtype=int).reshape(-1, 2)
        gam = np.array(self.edge_gamma, dtype=float).reshape(-1)
        if gam.size != edges.shape[0]:
            raise DimensionError(f"{gam.size} edge weights for {edges.shape[0]} edges")
        if not (np.all(np.isfinite(nominal)) and np.all(np.isfinite(radii)) and np.all(np.isfinite(gam))):
            raise DomainError("graph parameters must be finite")
        if np.any(radii < 0) or np.any(gam < 0):
            raise DomainError("gamma values must be nonnegative")
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise DimensionError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise DomainError("self-loop edges are not allowed; use node radii")
            edges = np.sort(edges, axis=1)
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            edges, gam = edges[order], gam[order]
            if np.any(np.all(np.diff(edges, axis=0) == 0, axis=1)):
                raise DomainError("duplicate edges")
        for name, val in (("nominal", nominal), ("node_radii", radii), ("edges", edges), ("edge_gamma", gam)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def from_edge_map(cls, nominal, node_radii, edge_map: dict) -> "UncertaintyGraph":
        pairs = list(edge_map)
        return cls(nominal, node_radii, np.array(pairs, dtype=int).reshape(-1, 2),
                   np.array([edge_map[e] for e in pairs], dtype=float))

    @property
    def n(self) -> int:
        return self.nominal.size

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def weight_matrix(self) -> np.ndarray:
        """Direct edge weights with ``inf`` for non-edges and 0 on the diagonal."""
        w = np.full((self.n, self.n), np.inf)
        np.fill_diagonal(w, 0.0)
        if self.n_edges:
            i, j = self.edges[:, 0], self.edges[:, 1]
            w[i, j] = self.edge_gamma
            w[j, i] = self.edge_gamma
        return w

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "nominal": self.nominal.tolist(),
            "node_radii": self.node_radii.tolist(),
            "edges": [{"i": int(i), "j": int(j), "gamma": float(g)}
                      for (i, j), g in zip(self.edges, self.edge_gamma)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UncertaintyGraph":
        jsonschema.validate(data, graph_schema())
        if len(data["nominal"]) != data["n"]:
            raise DimensionError("nominal length differs from n")
        edges = [(e["i"], e["j"]) for e in data["edges"]]
        gam = [e["gamma"] for e in data["edges"]]
        return cls(data["nominal"], data["node_radii"], np.array(edges, dtype=int).reshape(-1, 2), gam)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "UncertaintyGraph":
        return cls.from_dict(json.loads(text))


def graph_schema() -> dict:
    path = resources.files("smoothro") / "schemas" / "uncertainty_graph.schema.json"
    return json.loads(path.read_text())


def floyd_warshall(weights: np.ndarray) -> np.ndarray:
    d = np.array(weights, dtype=float)
    for k in range(d.shape[0]):
        np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
    return d


def metric_closure(g: UncertaintyGraph) -> np.ndarray:
    """All-pairs shortest-path distances under the edge weights (``inf`` across components)."""
    return floyd_warshall(g.weight_matrix())


def projection_bounds(g: UncertaintyGraph, dist: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tightest per-coordinate bounds; raises :class:`EmptySetError` when they cross."""
    lo_k = (g.nominal - g.node_radii)[:, None]
    hi_k = (g.nominal + g.node_radii)[:, None]
    lower = np.max(lo_k - dist, axis=0)
    upper = np.min(hi_k + dist, axis=0)
    bad = np.flatnonzero(lower > upper + EMPTY_TOL)
    if bad.size:
        j = int(bad[0])
        raise EmptySetError(f"set is empty: lower bound {lower[j]:.6g} exceeds upper bound {upper[j]:.6g} at {j}")
    return lower, upper


@dataclass(frozen=True)
class SmoothSet:
    graph: UncertaintyGraph
    dist: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def nominal(self) -> np.ndarray:
        return self.graph.nominal

    @property
    def n_rows(self) -> int:
        return 2 * (self.graph.n + self.graph.n_edges)

    def contains(self, delta, tol: float = MEMBER_TOL) -> bool:
        return bool(contains_many(self, np.asarray(delta, dtype=float).reshape(1, -1), tol)[0])

    def contains_many(self, points: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
        return contains_many(self, points, tol)


def build(g: UncertaintyGraph) -> SmoothSet:
    dist = metric_closure(g)
    lower, upper = projection_bounds(g, dist)
    s = SmoothSet(g, dist, lower, upper)
    for a in (dist, lower, upper):
        a.setflags(write=False)
    # the lower-bound vector is a member whenever the bounds do not cross, which certifies non-emptiness
    if not s.contains(np.minimum(lower, upper), tol=1e-9 * (1.0 + float(np.max(np.abs(lower))))):
        raise EmptySetError("set is empty: the lower projection bound is not a member")
    return s


def contains(s: SmoothSet, delta, tol: float = MEMBER_TOL) -> bool:
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (s.n,):
        raise DimensionError(f"expected a vector of length {s.n}, got shape {delta.shape}")
    return s.contains(delta, tol)


def contains_many(s: SmoothSet, points: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
    """Vectorized membership for the rows of ``points`` (shape ``(k, n)``)."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[1] != s.n:
        raise DimensionError(f"expected points of shape (k, {s.n}), got {x.shape}")
    g = s.graph
    ok = np.all(np.abs(x - g.nominal) <= g.node_radii + tol, axis=1)
    if g.n_edges:
        diff = np.abs(x[:, g.edges[:, 0]] - x[:, g.edges[:, 1]])
        ok &= np.all(diff <= g.edge_gamma + tol, axis=1)
    return ok


def constraint_rows(s: SmoothSet, as_sparse: bool = False):
    """The ``2(n + |E|)`` rows ``a_l^T delta <= b_l`` describing the set, in canonical order.

    Vertex ``i`` contributes ``(+e_i, nominal_i + gamma_ii)`` then ``(-e_i, gamma_ii - nominal_i)``;
    edge ``(i, j)``, taken in stored lexicographic order, contributes
    ``(e_i - e_j, gamma_ij)`` then ``(e_j - e_i, gamma_ij)``.
    """
    g = s.graph
    n, ne = g.n, g.n_edges
    rows = np.repeat(np.arange(2 * (n + ne)), np.r_[np.ones(2 * n, dtype=int), 2 * np.ones(2 * ne, dtype=int)])
    vi = np.arange(n)
    ei, ej = g.edges[:, 0], g.edges[:, 1]
    cols = np.concatenate([np.repeat(vi, 2), np.column_stack([ei, ej, ej, ei]).reshape(-1)])
    vals = np.concatenate([np.tile([1.0, -1.0], n), np.tile([1.0, -1.0, 1.0, -1.0], ne)])
    b = np.concatenate([np.column_stack([g.nominal + g.node_radii, g.node_radii - g.nominal]).reshape(-1),
                        np.repeat(g.edge_gamma, 2)])
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(2 * (n + ne), n))
    return (A, b) if as_sparse else (A.toarray(), b)


def inscribed_radius(s: SmoothSet, sigma) -> float:
    """Radius of the largest covariance-standardized ball centred at 0 inside the set."""
    g = s.graph
    if np.any(g.nominal != 0):
        warnings.warn("inscribed radius assumes a zero nominal vector", stacklevel=2)
    sig = as_symmetric(sigma)
    if sig.shape[0] != g.n:
        raise DimensionError("covariance order differs from set dimension")
    ratios = []
    pairs = [(i, i, g.node_radii[i]) for i in range(g.n)]
    pairs += [(int(i), int(j), gam) for (i, j), gam in zip(g.edges, g.edge_gamma)]
    for i, j, gam in pairs:
        q = quad_form_diff(sig, i, j)
        if q > 0:
            ratios.append(gam / math.sqrt(q))
    return float(min(ratios)) if ratios else math.inf


def _log_unit_ball_volume(n: int) -> float:
    return 0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1.0)


def _log_sqrt_det(sigma: np.ndarray) -> float:
    return float(np.sum(np.log(np.diag(cholesky(sigma)))))


def sym_sqrt(sigma) -> np.ndarray:
    w, v = jacobi_eigh(sigma)
    if w.size and w[-1] < 0:
        w = np.maximum(w, 0.0)
    return (v * np.sqrt(w)) @ v.T


@dataclass(frozen=True)
class EllipsoidSet:
    """``{ delta : (delta - c)^T Sigma^{-1} (delta - c) <= omega }``."""

    sigma: np.ndarray
    omega: float
    center: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "sigma", as_symmetric(self.sigma))
        if self.omega < 0:
            raise DomainError("ellipsoid radius must be nonnegative")
        c = np.zeros(self.sigma.shape[0]) if self.center is None else np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", c)

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    def contains_many(self, points: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
        L = cholesky(self.sigma)
        z = np.linalg.solve(L, (np.asarray(points, dtype=float) - self.center).T)
        return np.sum(z * z, axis=0) <= self.omega + tol

    def sample_boundary(self, k: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.normal(size=(k, self.n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return self.center + math.sqrt(self.omega) * u @ cholesky(self.sigma).T

    def sample_uniform(self, k: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.normal(size=(k, self.n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        u *= rng.uniform(size=(k, 1)) ** (1.0 / self.n)
        return self.center + math.sqrt(self.omega) * u @ cholesky(self.sigma).T


@dataclass(frozen=True)
class RotatedBoxSet:
    """``{ Sigma^{1/2} u : ||u||_inf <= r }`` with the symmetric square root."""

    sigma: np.ndarray
    r: float

    def __post_init__(self):
        object.__setattr__(self, "sigma", as_symmetric(self.sigma))
        if self.r < 0:
            raise DomainError("rotated box radius must be nonnegative")

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    def contains_many(self, points: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
        u = np.linalg.solve(sym_sqrt(self.sigma), np.asarray(points, dtype=float).T)
        return np.max(np.abs(u), axis=0) <= self.r + tol


def ellipsoid_geometry(e: EllipsoidSet) -> tuple[float, float]:
    """Exact ``(volume, diameter)``."""
    n = e.n
    vol = math.exp(_log_unit_ball_volume(n) + 0.5 * n * math.log(e.omega) + _log_sqrt_det(e.sigma)) \
        if e.omega > 0 else 0.0
    return vol, 2.0 * math.sqrt(e.omega * max_eigenvalue(e.sigma))


def rotated_box_geometry(rb: RotatedBoxSet, max_n: int = 20) -> tuple[float, float]:
    """Exact ``(volume, diameter)``; the diameter enumerates ``2^(n-1)`` sign vectors."""
    n = rb.n
    if n > max_n:
        raise DimensionError(f"rotated box diameter enumerates 2^(n-1) patterns; n={n} > {max_n}")
    vol = math.exp(n * math.log(2.0 * rb.r) + _log_sqrt_det(rb.sigma)) if rb.r > 0 else 0.0
    # fix the first sign since u and -u give the same length
    signs = np.array(list(itertools.product([1.0, -1.0], repeat=n - 1))).reshape(-1, n - 1)
    u = np.hstack([np.ones((signs.shape[0], 1)), signs])
    quad = np.einsum("ki,ij,kj->k", u, rb.sigma, u)
    return vol, 2.0 * rb.r * math.sqrt(float(np.max(quad)))


def box_volume(lower, upper) -> float:
    return float(np.prod(np.asarray(upper, dtype=float) - np.asarray(lower, dtype=float)))


def mc_volume(membership: Callable[[np.ndarray], np.ndarray], box: tuple, samples: int = 10_000_000,
              seed: int = 0, batch: int = 1 << 20) -> tuple[float, float]:
    """Rejection-sampling volume estimate inside an enclosing box.

    ``membership`` maps a ``(k, n)`` array of points to a boolean array.
    Returns the estimate and its binomial standard error.
    """
    lower, upper = (np.asarray(v, dtype=float) for v in box)
    if lower.shape != upper.shape or np.any(upper < lower):
        raise DomainError("invalid enclosing box")
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        k = min(batch, samples - done)
        pts = lower + (upper - lower) * rng.random((k, lower.size))
        hits += int(np.count_nonzero(membership(pts)))
        done += k
    vbox = box_volume(lower, upper)
    if hits == 0:
        warnings.warn("no sample fell inside the set; volume estimate is 0", stacklevel=2)
    frac = hits / samples
    return vbox * frac, vbox * math.sqrt(frac * (1.0 - frac) / samples)


def _subset_vertices(A: np.ndarray, b: np.ndarray, subsets: np.ndarray, tol: float) -> np.ndarray:
    M = A[subsets]
    rhs = b[subsets]
    det = np.linalg.det(M)
    ok = np.abs(det) > 1e-10
    if not np.any(ok):
        return np.zeros((0, A.shape[1]))
    x = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(x @ A.T <= b + tol, axis=1)
    return x[feas]


def enumerate_vertices(s: SmoothSet, max_subsets: int = 5_000_000, chunk: int = 50_000) -> np.ndarray:
    """Vertices of the set from all ``n``-subsets of its constraint rows."""
    A, b = constraint_rows(s)
    m, n = A.shape
    if math.comb(m, n) > max_subsets:
        raise DimensionError(f"C({m}, {n}) row subsets exceed the enumeration cap {max_subsets}")
    tol = 1e-9 * (1.0 + float(np.max(np.abs(b))))
    found = []
    it = itertools.combinations(range(m), n)
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=int)
        if block.size == 0:
            break
        found.append(_subset_vertices(A, b, block.reshape(-1, n), tol))
    verts = np.vstack(found) if found else np.zeros((0, n))
    if verts.size == 0:
        return verts
    scale = 1e-8 * (1.0 + float(np.max(np.abs(verts))))
    _, idx = np.unique(np.round(verts / scale), axis=0, return_index=True)
    return verts[np.sort(idx)]


def max_pairwise_distance(points: np.ndarray, chunk: int = 2048) -> float:
    best, pair = -1.0, (0, 0)
    sq = np.sum(points * points, axis=1)
    for start in range(0, points.shape[0], chunk):
        p = points[start:start + chunk]
        d2 = sq[start:start + chunk, None] + sq[None, :] - 2.0 * p @ points.T
        k = int(np.argmax(d2))
        if d2.flat[k] > best:
            best, pair = float(d2.flat[k]), (start + k // points.shape[0], k % points.shape[0])
    # recompute the winning pair directly to avoid the cancellation in the expansion
    return float(np.linalg.norm(points[pair[0]] - points[pair[1]]))


def polytope_diameter(s: SmoothSet, max_n: int = 8) -> float:
    if s.n > max_n:
        raise DimensionError(f"vertex enumeration limited to n <= {max_n}, got {s.n}")
    verts = enumerate_vertices(s)
    if verts.shape[0] == 0:
        raise EmptySetError("no vertices found")
    return max_pairwise_distance(verts)


def smooth_set(nominal: Iterable[float], node_radii: Iterable[float], edges=(), edge_gamma=()) -> SmoothSet:
    """Convenience: build a set straight from parameter arrays."""
    return build(UncertaintyGraph(np.asarray(list(nominal), dtype=float), np.asarray(list(node_radii), dtype=float),
                                  np.array(list(edges), dtype=int).reshape(-1, 2), np.asarray(list(edge_gamma), dtype=float)))
