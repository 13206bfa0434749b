"""Multi-location transshipment with affine recourse over a standardized smooth set.

Demand is ``nominal + delta`` with ``delta ~ N(mu, Sigma)``; the set lives on the
standardized ``xi = (delta - mu) / sigma``, so ``demand(xi) = nominal + mu + sigma * xi``.
Recourse rules are affine in ``xi``:

    x_a(xi) = y_tr[a] + xi^T x_tr[a],    tau_i(xi) = y_ic[i] + xi^T x_ic[i].

Primal variables ``x`` (those multiplied by ``xi``) are ``[x_tr, x_ic, one]`` where ``one``
is fixed at 1 and carries terms constant in the decisions; ``y = [y_order, y_tr, y_ic, y_tc]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ..calibration import CalibrationRule, gamma_from_covariance
from ..errors import DimensionError, DomainError
from ..model import RobustLP
from ..sets import SmoothSet, build, complete_edges
from ..solver import SolverOptions, solve

MAX_REDRAWS = 1000


@dataclass(frozen=True, eq=False)
class TransshipmentInstance:
    n: int
    tail: np.ndarray          # arc tails; retailers 0..n-1, supplier n
    head: np.ndarray
    c_order: np.ndarray
    c_hold: np.ndarray
    c_back: np.ndarray
    c_tr: np.ndarray          # per arc
    nominal: np.ndarray       # per retailer
    mu: np.ndarray
    cov: np.ndarray
    seed: int | None = None

    @property
    def n_arcs(self) -> int:
        return self.tail.size

    @property
    def supplier(self) -> int:
        return self.n

    @property
    def stdev(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    @property
    def correlation(self) -> np.ndarray:
        s = self.stdev
        return self.cov / np.outer(s, s)

    @property
    def base_demand(self) -> np.ndarray:
        """Demand at the set nominal ``xi = 0``."""
        return self.nominal + self.mu

    def balance_matrix(self) -> np.ndarray:
        """``B[i, a]`` is +1 if arc ``a`` enters retailer ``i`` and -1 if it leaves it."""
        B = np.zeros((self.n, self.n_arcs))
        a = np.arange(self.n_arcs)
        into = self.head < self.n
        B[self.head[into], a[into]] += 1.0
        out = self.tail < self.n
        B[self.tail[out], a[out]] -= 1.0
        return B


def transshipment_arcs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Bidirectional retailer cycle plus supplier arcs in both directions."""
    pairs = []
    if n >= 2:
        cyc = {(i, (i + 1) % n) for i in range(n)} | {((i + 1) % n, i) for i in range(n)}
        pairs += sorted(p for p in cyc if p[0] != p[1])
    pairs += [(n, i) for i in range(n)] + [(i, n) for i in range(n)]
    arr = np.array(pairs, dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def generate_instance(n: int, seed: int = 0) -> TransshipmentInstance:
    """Random instance; draws where backlog is cheaper than holding everywhere are rejected."""
    if n < 1:
        raise DomainError("need at least one retailer")
    rng = np.random.default_rng(seed)
    tail, head = transshipment_arcs(n)
    for _ in range(MAX_REDRAWS):
        c_order = rng.uniform(0, 1, n)
        c_hold = rng.uniform(0, 1, n)
        c_tr = rng.uniform(0, 1, tail.size)
        c_back = rng.uniform(0, 4, n)
        if np.any(c_back >= c_hold):
            break
    else:
        raise DomainError("could not draw a non-degenerate cost vector")
    nominal = rng.uniform(50, 150, n)
    mu = rng.uniform(1, 2, n)
    R = rng.uniform(0, 1, (n, n))
    return TransshipmentInstance(n, tail, head, c_order, c_hold, c_back, c_tr, nominal, mu, R @ R.T, seed)


def transshipment_set(inst: TransshipmentInstance, p: float, rule: str = "normal_best",
                      edges: str | list = "complete") -> SmoothSet:
    """Smooth set on the standardized deviation, sized from the correlation matrix."""
    if isinstance(edges, str):
        if edges == "complete":
            edges = complete_edges(inst.n)
        elif edges == "none":
            edges = []
        else:
            raise DomainError(f"unknown edge layout {edges!r}")
    return build(gamma_from_covariance(inst.correlation, edges, CalibrationRule(rule, p)))


# ---------------------------------------------------------------------------
# affine counterpart


@dataclass(frozen=True)
class AARCLayout:
    n: int
    n_arcs: int

    @property
    def n_x(self) -> int:
        return self.n_arcs * self.n + self.n * self.n + 1

    @property
    def n_y(self) -> int:
        return self.n + self.n_arcs + self.n + 1

    def x_tr(self, a, j):
        return np.asarray(a) * self.n + np.asarray(j)

    def x_ic(self, i, j):
        return self.n_arcs * self.n + np.asarray(i) * self.n + np.asarray(j)

    @property
    def one(self) -> int:
        return self.n_x - 1

    def y_order(self, i):
        return np.asarray(i)

    def y_tr(self, a):
        return self.n + np.asarray(a)

    def y_ic(self, i):
        return self.n + self.n_arcs + np.asarray(i)

    @property
    def y_tc(self) -> int:
        return self.n_y - 1


def build_transshipment_aarc(inst: TransshipmentInstance, set_: SmoothSet | None = None) -> RobustLP:
    n, nA = inst.n, inst.n_arcs
    if set_ is not None and set_.n != n:
        raise DimensionError(f"set dimension {set_.n} differs from retailer count {n}")
    L = AARCLayout(n, nA)
    B = inst.balance_matrix()
    sig = inst.stdev
    D0 = inst.base_demand
    J = np.arange(n)
    C, d, c, names = [], [], [], []

    def block(entries):
        rows, cols, vals = (np.concatenate([np.asarray(e[k]) for e in entries]) for k in range(3))
        return sparse.csr_matrix((vals.astype(float), (rows.astype(np.int64), cols.astype(np.int64))),
                                 shape=(n, L.n_x))

    def tr_terms(weights):
        # sum_a weights[a] * x_tr[a, j] in row j
        a = np.flatnonzero(weights)
        rows = np.tile(J, a.size)
        cols = L.x_tr(np.repeat(a, n), rows)
        return rows, cols, np.repeat(weights[a], n)

    def ic_terms(i, w):
        return J, L.x_ic(np.full(n, i), J), np.full(n, float(w))

    # total cost epigraph
    ents = [tr_terms(inst.c_tr)] + [ic_terms(i, 1.0) for i in range(n)]
    C.append(block(ents))
    dv = np.zeros(L.n_y)
    dv[L.y_order(J)] = inst.c_order
    dv[L.y_tr(np.arange(nA))] = inst.c_tr
    dv[L.y_ic(J)] = 1.0
    dv[L.y_tc] = -1.0
    d.append(dv)
    c.append(0.0)
    names.append("cost")
    for i in range(n):
        for kind, w in (("backlog", inst.c_back[i]), ("holding", -inst.c_hold[i])):
            # w * (demand_i - y_order_i - B_i x(xi)) - tau_i(xi) <= 0, with w = c_b or -c_h
            ents = [tr_terms(-w * B[i]), ic_terms(i, -1.0),
                    (np.array([i]), np.array([L.one]), np.array([w * sig[i]]))]
            C.append(block(ents))
            dv = np.zeros(L.n_y)
            dv[L.y_order(i)] = -w
            dv[L.y_tr(np.arange(nA))] = -w * B[i]
            dv[L.y_ic(i)] = -1.0
            d.append(dv)
            c.append(-w * D0[i])
            names.append(f"{kind}[{i}]")
    for a in range(nA):
        C.append(block([(J, L.x_tr(np.full(n, a), J), -np.ones(n))]))
        dv = np.zeros(L.n_y)
        dv[L.y_tr(a)] = -1.0
        d.append(dv)
        c.append(0.0)
        names.append(f"flow[{a}]")
    x_lo = np.full(L.n_x, -np.inf)
    x_hi = np.full(L.n_x, np.inf)
    x_lo[L.one] = x_hi[L.one] = 1.0
    y_lo = np.full(L.n_y, -np.inf)
    y_lo[L.y_order(J)] = 0.0
    g = np.zeros(L.n_y)
    g[L.y_tc] = 1.0
    return RobustLP(n, np.zeros(L.n_x), g, C, np.array(d), np.array(c), x_lower=x_lo, x_upper=x_hi,
                    y_lower=y_lo, names=tuple(names))


@dataclass(frozen=True, eq=False)
class AffineRules:
    y_order: np.ndarray
    y_tr: np.ndarray
    x_tr: np.ndarray          # n_arcs x n
    y_ic: np.ndarray
    x_ic: np.ndarray          # n x n
    objective: float

    def flows(self, xi: np.ndarray) -> np.ndarray:
        """Arc flows for standardized scenarios (rows of ``xi``)."""
        return self.y_tr[None, :] + np.atleast_2d(xi) @ self.x_tr.T


def extract_rules(inst: TransshipmentInstance, x, y, objective: float) -> AffineRules:
    n, nA = inst.n, inst.n_arcs
    L = AARCLayout(n, nA)
    x, y = np.asarray(x), np.asarray(y)
    return AffineRules(y[L.y_order(np.arange(n))].copy(), y[L.y_tr(np.arange(nA))].copy(),
                       x[:nA * n].reshape(nA, n).copy(), y[L.y_ic(np.arange(n))].copy(),
                       x[nA * n:nA * n + n * n].reshape(n, n).copy(), float(objective))


def scenario_costs(rules: AffineRules, inst: TransshipmentInstance, xi: np.ndarray) -> np.ndarray:
    """Exact cost with the affine transshipment rule and the smallest feasible inventory cost."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    demand = inst.base_demand[None, :] + xi * inst.stdev[None, :]
    flows = rules.flows(xi)
    stock = rules.y_order[None, :] + flows @ inst.balance_matrix().T - demand
    tau = np.maximum(inst.c_back * np.maximum(-stock, 0.0), inst.c_hold * np.maximum(stock, 0.0))
    return float(inst.c_order @ rules.y_order) + flows @ inst.c_tr + tau.sum(axis=1)


def sample_deviations(inst: TransshipmentInstance, k: int, seed: int) -> np.ndarray:
    """``N(mu, Sigma)`` deviations clamped at zero componentwise."""
    rng = np.random.default_rng(seed)
    dev = rng.multivariate_normal(inst.mu, inst.cov, size=k, method="cholesky")
    return np.maximum(dev, 0.0)


def evaluate_transshipment(rules: AffineRules, inst: TransshipmentInstance, n_scenarios: int = 10_000,
                           seed: int = 0) -> tuple[float, float]:
    dev = sample_deviations(inst, n_scenarios, seed)
    xi = (dev - inst.mu[None, :]) / inst.stdev[None, :]
    costs = scenario_costs(rules, inst, xi)
    return float(costs.mean()), float(costs.max())


def solve_transshipment(inst: TransshipmentInstance, p: float, method: str = "auto", edges="complete",
                        opts: SolverOptions | None = None):
    s = transshipment_set(inst, p, edges=edges)
    model = build_transshipment_aarc(inst, s)
    res = solve(model, s, method, opts)
    rules = extract_rules(inst, res.x, res.y, res.objective) if res.ok else None
    return res, rules, s, model


def transshipment_report(n: int, ps, method: str = "auto", seed: int = 0, scenarios: int = 10_000,
                         instances: int = 1, edges="complete") -> dict:
    rows = []
    for k in range(instances):
        inst = generate_instance(n, seed + k)
        for p in ps:
            res, rules, s, model = solve_transshipment(inst, p, method, edges)
            row = {"instance": k, "seed": seed + k, "p": p, "status": res.status, "objective": res.objective,
                   "method": res.stats.get("chosen", method),
                   "stats": {k: v for k, v in res.stats.items() if k != "time"}}   # keep reports reproducible
            if rules is not None:
                row["mean_cost"], row["max_cost"] = evaluate_transshipment(rules, inst, scenarios, seed + k)
            rows.append(row)
    return {"n": n, "p": list(ps), "method": method, "seed": seed, "scenarios": scenarios, "rows": rows}
