"""Linear programming backend.

Programs are ``min c^T z`` subject to rows ``a_i^T z (<=, =, >=) r_i`` and bounds
``lower <= z <= upper`` (``-inf``/``inf`` allowed).  Two interchangeable backends
return the same :class:`LPSolution` contract:

* ``"simplex"``: the bundled dense two-phase revised simplex,
* ``"highs"``: scipy's HiGHS through ``scipy.optimize.linprog``.

Dual sign convention (minimization): duals of ``<=`` rows are ``<= 0``, duals of
``>=`` rows are ``>= 0``; each dual is the derivative of the optimal objective
with respect to the row's right-hand side.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import DimensionError, DomainError

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
NUMERICAL = "numerical_error"


@dataclass
class LinearProgram:
    c: np.ndarray
    A: sparse.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        nv = self.c.size
        A = self.A
        if A is None:
            A = sparse.csr_matrix((0, nv))
        A = sparse.csr_matrix(A, dtype=float)
        if A.shape[1] != nv:
            raise DimensionError(f"constraint matrix has {A.shape[1]} columns for {nv} variables")
        self.A = A
        m = A.shape[0]
        self.sense = np.array([_norm_sense(s) for s in np.atleast_1d(self.sense)] if m else [], dtype="<U2")
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        if self.sense.size != m or self.rhs.size != m:
            raise DimensionError("sense and rhs must have one entry per row")
        self.lower = np.zeros(nv) if self.lower is None else np.broadcast_to(
            np.asarray(self.lower, dtype=float), (nv,)).copy()
        self.upper = np.full(nv, np.inf) if self.upper is None else np.broadcast_to(
            np.asarray(self.upper, dtype=float), (nv,)).copy()
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(A.data)) and np.all(np.isfinite(self.rhs))):
            raise DomainError("program data must be finite")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)) or np.any(self.lower == np.inf) \
                or np.any(self.upper == -np.inf):
            raise DomainError("invalid variable bounds")

    @classmethod
    def from_rows(cls, c, rows, lower=None, upper=None) -> "LinearProgram":
        """``rows`` is a list of ``(coefficients, sense, rhs)`` with dense coefficient vectors."""
        c = np.asarray(c, dtype=float)
        A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), c.size)
        return cls(c, A, [r[1] for r in rows], [r[2] for r in rows], lower, upper)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def objective(self, z) -> float:
        return float(self.c @ z)

    def row_activity(self, z) -> np.ndarray:
        return self.A @ np.asarray(z, dtype=float)

    def max_violation(self, z) -> float:
        act = self.row_activity(z)
        v = np.zeros(self.n_rows)
        le, ge, eq = self.sense == LE, self.sense == GE, self.sense == EQ
        v[le] = act[le] - self.rhs[le]
        v[ge] = self.rhs[ge] - act[ge]
        v[eq] = np.abs(act[eq] - self.rhs[eq])
        vb = np.maximum(self.lower - z, z - self.upper)
        return float(max(np.max(v, initial=0.0), np.max(vb, initial=0.0)))


def _norm_sense(s) -> str:
    s = str(s).strip()
    table = {"<=": LE, "<": LE, "L": LE, "=": EQ, "==": EQ, "E": EQ, ">=": GE, ">": GE, "G": GE}
    if s not in table:
        raise DomainError(f"unknown row relation {s!r}")
    return table[s]


@dataclass
class LPSolution:
    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = math.nan
    iterations: int = 0
    backend: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class LPOptions:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-9
    max_iter: int = 50_000
    refactor_every: int = 64
    degenerate_switch: int = 20
    auto_max_rows: int = 300
    auto_max_cols: int = 5000


class LPBuilder:
    """Incremental assembly of a :class:`LinearProgram` from COO pieces."""

    def __init__(self):
        self._c: list[np.ndarray] = []
        self._lo: list[np.ndarray] = []
        self._hi: list[np.ndarray] = []
        self._r: list[np.ndarray] = []
        self._k: list[np.ndarray] = []
        self._v: list[np.ndarray] = []
        self._sense: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self.n_vars = 0
        self.n_rows = 0

    def add_vars(self, k: int, cost=0.0, lower=0.0, upper=np.inf) -> np.ndarray:
        idx = np.arange(self.n_vars, self.n_vars + k)
        self._c.append(np.broadcast_to(np.asarray(cost, dtype=float), (k,)).copy())
        self._lo.append(np.broadcast_to(np.asarray(lower, dtype=float), (k,)).copy())
        self._hi.append(np.broadcast_to(np.asarray(upper, dtype=float), (k,)).copy())
        self.n_vars += k
        return idx

    def add_rows(self, rows, cols, vals, sense, rhs) -> np.ndarray:
        """Append rows; ``rows`` are local indices ``0..len(rhs)-1``."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        k = rhs.size
        sense = np.broadcast_to(np.asarray(sense, dtype="<U2"), (k,))
        self._r.append(np.asarray(rows, dtype=np.int64) + self.n_rows)
        self._k.append(np.asarray(cols, dtype=np.int64))
        self._v.append(np.asarray(vals, dtype=float))
        self._sense.append(sense.copy())
        self._rhs.append(rhs)
        idx = np.arange(self.n_rows, self.n_rows + k)
        self.n_rows += k
        return idx

    def add_row(self, cols, vals, sense, rhs) -> int:
        cols = np.asarray(cols, dtype=np.int64)
        return int(self.add_rows(np.zeros(cols.size, dtype=np.int64), cols, vals, sense, [rhs])[0])

    def set_cost(self, idx, cost) -> None:
        full = np.concatenate(self._c) if self._c else np.zeros(0)
        full[idx] = cost
        self._c = [full]

    def build(self) -> LinearProgram:
        cat = lambda parts, dt=float: np.concatenate(parts) if parts else np.zeros(0, dtype=dt)
        A = sparse.coo_matrix((cat(self._v), (cat(self._r, np.int64), cat(self._k, np.int64))),
                              shape=(self.n_rows, self.n_vars)).tocsr()
        A.sum_duplicates()
        return LinearProgram(cat(self._c), A, cat(self._sense, "<U2"), cat(self._rhs), cat(self._lo), cat(self._hi))


# ---------------------------------------------------------------------------
# bundled revised simplex


@dataclass
class _StandardForm:
    A: np.ndarray          # m x N, rows with rhs >= 0
    b: np.ndarray
    c: np.ndarray
    n_struct: int          # structural standard columns (before slacks)
    row_flip: np.ndarray   # +1 / -1 per standard row
    n_orig_rows: int
    col_var: np.ndarray    # original variable of each structural column
    col_sign: np.ndarray   # +1 / -1
    offset: np.ndarray     # z = offset + sum sign * w
    slack_of_row: np.ndarray  # slack column per row (-1 for equalities)
    obj_const: float = 0.0


def _standard_form(p: LinearProgram) -> _StandardForm:
    nv = p.n_vars
    lo, hi = p.lower, p.upper
    col_var, col_sign, offset = [], [], np.zeros(nv)
    bound_rows = []
    for j in range(nv):
        if np.isfinite(lo[j]):
            offset[j] = lo[j]
            col_var.append(j)
            col_sign.append(1.0)
            if np.isfinite(hi[j]):
                bound_rows.append((len(col_var) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            offset[j] = hi[j]
            col_var.append(j)
            col_sign.append(-1.0)
        else:
            col_var += [j, j]
            col_sign += [1.0, -1.0]
    col_var = np.array(col_var, dtype=int)
    col_sign = np.array(col_sign)
    ns = col_var.size
    Ad = p.A.toarray()
    A_struct = Ad[:, col_var] * col_sign
    rhs = p.rhs - Ad @ offset
    sense = list(p.sense)
    if bound_rows:
        extra = np.zeros((len(bound_rows), ns))
        for r, (col, width) in enumerate(bound_rows):
            extra[r, col] = 1.0
        A_struct = np.vstack([A_struct, extra])
        rhs = np.concatenate([rhs, [w for _, w in bound_rows]])
        sense += [LE] * len(bound_rows)
    m = A_struct.shape[0]
    n_slack = sum(s != EQ for s in sense)
    A = np.zeros((m, ns + n_slack))
    A[:, :ns] = A_struct
    slack_of_row = np.full(m, -1)
    k = ns
    for i, s in enumerate(sense):
        if s == LE:
            A[i, k] = 1.0
        elif s == GE:
            A[i, k] = -1.0
        else:
            continue
        slack_of_row[i] = k
        k += 1
    flip = np.where(rhs < 0, -1.0, 1.0)
    A *= flip[:, None]
    b = rhs * flip
    c = np.zeros(A.shape[1])
    c[:ns] = p.c[col_var] * col_sign
    return _StandardForm(A, b, c, ns, flip, p.n_rows, col_var, col_sign, offset, slack_of_row,
                         float(p.c @ offset))


class _Simplex:
    def __init__(self, A: np.ndarray, b: np.ndarray, opts: LPOptions):
        self.A = A
        self.b = b
        self.m, self.N = A.shape
        self.opts = opts
        self.iterations = 0

    def refactor(self):
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        self.xB = self.Binv @ self.b
        self.since_refactor = 0

    def run(self, c: np.ndarray, eligible: np.ndarray) -> str:
        opts = self.opts
        bland = False
        degenerate = 0
        while True:
            if self.iterations >= opts.max_iter:
                return ITERATION_LIMIT
            y = c[self.basis] @ self.Binv
            d = c - y @ self.A
            d[self.basis] = 0.0
            cand = np.flatnonzero(eligible & (d < -opts.opt_tol))
            if cand.size == 0:
                return OPTIMAL
            q = int(cand[0]) if bland else int(cand[np.argmin(d[cand])])
            u = self.Binv @ self.A[:, q]
            pos = np.flatnonzero(u > opts.pivot_tol * max(1.0, float(np.max(np.abs(u)))))
            if pos.size == 0:
                return UNBOUNDED
            xb = np.maximum(self.xB[pos], 0.0)
            if bland:
                ratios = xb / u[pos]
                theta = float(np.min(ratios))
                ties = pos[ratios <= theta + 1e-12 * (1.0 + theta)]
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                # Harris two-pass ratio test: largest pivot among near-minimal ratios
                bound = float(np.min((xb + opts.feas_tol) / u[pos]))
                ok = pos[xb / u[pos] <= bound]
                r = int(ok[np.argmax(u[ok])])
            theta = max(float(self.xB[r]), 0.0) / float(u[r])
            self.pivot(r, q, u, theta)
            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= opts.degenerate_switch:
                    bland = True
            else:
                degenerate = 0
                bland = False

    def pivot(self, r: int, q: int, u: np.ndarray, theta: float):
        self.xB -= theta * u
        self.xB[r] = theta
        piv = u[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(u, row)
        self.Binv[r] = row
        self.basis[r] = q
        self.iterations += 1
        self.since_refactor += 1
        if self.since_refactor >= self.opts.refactor_every:
            self.refactor()


def _solve_simplex(p: LinearProgram, opts: LPOptions) -> LPSolution:
    sf = _standard_form(p)
    m, N = sf.A.shape
    # initial basis: slacks with +1 where available, artificials elsewhere
    basis = np.empty(m, dtype=int)
    art_rows = []
    for i in range(m):
        k = sf.slack_of_row[i]
        if k >= 0 and sf.A[i, k] > 0:
            basis[i] = k
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    A = np.hstack([sf.A, np.zeros((m, n_art))])
    for t, i in enumerate(art_rows):
        A[i, N + t] = 1.0
        basis[i] = N + t
    sx = _Simplex(A, sf.b, opts)
    sx.basis = basis
    sx.refactor()
    is_art = np.zeros(N + n_art, dtype=bool)
    is_art[N:] = True
    if n_art:
        c1 = np.zeros(N + n_art)
        c1[N:] = 1.0
        status = sx.run(c1, ~is_art)
        if status == ITERATION_LIMIT:
            return LPSolution(ITERATION_LIMIT, iterations=sx.iterations, backend="simplex")
        if status != OPTIMAL:
            # phase 1 is bounded below by 0; anything else is numerical breakdown
            return LPSolution(NUMERICAL, iterations=sx.iterations, backend="simplex")
        sx.refactor()
        infeas = float(np.sum(sx.xB[is_art[sx.basis]]))
        if infeas > opts.feas_tol * (1.0 + float(np.max(np.abs(sf.b), initial=0.0))):
            return LPSolution(INFEASIBLE, iterations=sx.iterations, backend="simplex")
        # drive basic artificials out where a structural pivot exists
        for r in np.flatnonzero(is_art[sx.basis]):
            row = sx.Binv[r] @ A[:, :N]
            row[sx.basis[sx.basis < N]] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > 1e-7:
                sx.pivot(r, j, sx.Binv @ A[:, j], 0.0)
        sx.refactor()
    c2 = np.concatenate([sf.c, np.zeros(n_art)])
    status = sx.run(c2, ~is_art)
    if status != OPTIMAL:
        return LPSolution(status, iterations=sx.iterations, backend="simplex")
    w = np.zeros(N + n_art)
    w[sx.basis] = np.maximum(sx.xB, 0.0)
    z = sf.offset.copy()
    np.add.at(z, sf.col_var, sf.col_sign * w[:sf.n_struct])
    y_std = (c2[sx.basis] @ sx.Binv) * sf.row_flip
    duals = y_std[:sf.n_orig_rows]
    return LPSolution(OPTIMAL, z, duals, float(p.c @ z), sx.iterations, "simplex")


# ---------------------------------------------------------------------------
# HiGHS adapter


_HIGHS_STATUS = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED, 4: NUMERICAL}


def _solve_highs(p: LinearProgram, opts: LPOptions) -> LPSolution:
    A = p.A
    le, ge, eq = p.sense == LE, p.sense == GE, p.sense == EQ
    ub_rows = np.flatnonzero(le | ge)
    sign = np.where(ge[ub_rows], -1.0, 1.0)
    A_ub = sparse.diags(sign) @ A[ub_rows] if ub_rows.size else None
    b_ub = sign * p.rhs[ub_rows] if ub_rows.size else None
    eq_rows = np.flatnonzero(eq)
    A_eq = A[eq_rows] if eq_rows.size else None
    b_eq = p.rhs[eq_rows] if eq_rows.size else None
    bounds = np.column_stack([np.where(np.isfinite(p.lower), p.lower, -np.inf),
                              np.where(np.isfinite(p.upper), p.upper, np.inf)])
    res = linprog(p.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": opts.feas_tol,
                           "dual_feasibility_tolerance": opts.feas_tol,
                           "maxiter": opts.max_iter * 10, "presolve": True})
    status = _HIGHS_STATUS.get(res.status, NUMERICAL)
    if status != OPTIMAL:
        return LPSolution(status, iterations=int(getattr(res, "nit", 0)), backend="highs")
    duals = np.zeros(p.n_rows)
    if ub_rows.size:
        duals[ub_rows] = sign * res.ineqlin.marginals
    if eq_rows.size:
        duals[eq_rows] = res.eqlin.marginals
    return LPSolution(OPTIMAL, np.asarray(res.x), duals, float(res.fun), int(res.nit), "highs")


def solve_lp(p: LinearProgram, opts: LPOptions | None = None, backend: str = "auto") -> LPSolution:
    """Solve ``p``; mathematical outcomes are reported through ``status``, never raised."""
    opts = opts or LPOptions()
    if backend == "auto":
        small = p.n_rows <= opts.auto_max_rows and p.n_vars <= opts.auto_max_cols
        backend = "simplex" if small else "highs"
    if backend == "simplex":
        return _solve_simplex(p, opts)
    if backend == "highs":
        return _solve_highs(p, opts)
    raise DomainError(f"unknown LP backend {backend!r}")


# ---------------------------------------------------------------------------
# MPS and JSON interchange


def _mps_line(f1="", f2="", f3="", f4="", f5="", f6="") -> str:
    # fixed MPS field columns: 2-3, 5-12, 15-22, 25-36, 40-47, 50-61
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        line += f"   {f5:<8}  {f6:>12}"
    return line.rstrip()


def _num(v: float) -> str:
    s = repr(float(v))
    return s if len(s) <= 12 else f"{v:.6e}"


def write_mps(p: LinearProgram, path, name: str = "SMOOTHRO") -> None:
    """Fixed-format MPS (values longer than 12 characters are rounded to 7 significant digits)."""
    rows = [f"R{i}" for i in range(p.n_rows)]
    cols = [f"C{j}" for j in range(p.n_vars)]
    kind = {LE: "L", EQ: "E", GE: "G"}
    out = [f"NAME          {name}", "ROWS", " N  OBJ"]
    out += [f" {kind[s]}  {r}" for s, r in zip(p.sense, rows)]
    out.append("COLUMNS")
    Ac = p.A.tocsc()
    for j in range(p.n_vars):
        entries = [("OBJ", p.c[j])] if p.c[j] != 0 else []
        sl = slice(Ac.indptr[j], Ac.indptr[j + 1])
        entries += [(rows[i], v) for i, v in zip(Ac.indices[sl], Ac.data[sl]) if v != 0]
        if not entries:
            entries = [("OBJ", 0.0)]
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            if len(pair) == 2:
                out.append(_mps_line("", cols[j], pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1])))
            else:
                out.append(_mps_line("", cols[j], pair[0][0], _num(pair[0][1])))
    out.append("RHS")
    for i in np.flatnonzero(p.rhs):
        out.append(_mps_line("", "RHS", rows[i], _num(p.rhs[i])))
    out.append("BOUNDS")
    for j in range(p.n_vars):
        lo, hi = p.lower[j], p.upper[j]
        if lo == hi:
            out.append(_mps_line("FX", "BND", cols[j], _num(lo)))
            continue
        if lo == -np.inf and hi == np.inf:
            out.append(_mps_line("FR", "BND", cols[j]))
            continue
        if lo == -np.inf:
            out.append(_mps_line("MI", "BND", cols[j]))
        elif lo != 0:
            out.append(_mps_line("LO", "BND", cols[j], _num(lo)))
        if hi != np.inf:
            out.append(_mps_line("UP", "BND", cols[j], _num(hi)))
    out.append("ENDATA")
    Path(path).write_text("\n".join(out) + "\n")


def read_mps(path) -> LinearProgram:
    section = None
    row_kind: dict[str, str] = {}
    row_order: list[str] = []
    obj_row = None
    col_index: dict[str, int] = {}
    cost: dict[int, float] = {}
    entries: list[tuple[str, int, float]] = []
    rhs: dict[str, float] = {}
    lower: dict[int, float] = {}
    upper: dict[int, float] = {}
    for raw in Path(path).read_text().splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw.startswith(" "):
            section = raw.split()[0]
            continue
        tok = raw.split()
        if section == "ROWS":
            k, r = tok
            if k == "N":
                obj_row = obj_row or r
            else:
                row_kind[r] = {"L": LE, "E": EQ, "G": GE}[k]
                row_order.append(r)
        elif section == "COLUMNS":
            cname = tok[0]
            j = col_index.setdefault(cname, len(col_index))
            for r, v in zip(tok[1::2], tok[2::2]):
                if r == obj_row:
                    cost[j] = float(v)
                else:
                    entries.append((r, j, float(v)))
        elif section == "RHS":
            for r, v in zip(tok[1::2], tok[2::2]):
                if r != obj_row:
                    rhs[r] = float(v)
        elif section == "BOUNDS":
            kind, cname = tok[0], tok[2]
            j = col_index[cname]
            v = float(tok[3]) if len(tok) > 3 else 0.0
            if kind == "FX":
                lower[j] = upper[j] = v
            elif kind == "FR":
                lower[j], upper[j] = -np.inf, np.inf
            elif kind == "MI":
                lower[j] = -np.inf
            elif kind == "LO":
                lower[j] = v
            elif kind == "UP":
                upper[j] = v
            else:
                raise DomainError(f"unsupported MPS bound type {kind}")
    rid = {r: i for i, r in enumerate(row_order)}
    nv = len(col_index)
    c = np.zeros(nv)
    for j, v in cost.items():
        c[j] = v
    A = sparse.coo_matrix(([v for _, _, v in entries], ([rid[r] for r, _, _ in entries], [j for _, j, _ in entries])),
                          shape=(len(row_order), nv)).tocsr()
    lo = np.zeros(nv)
    hi = np.full(nv, np.inf)
    for j, v in lower.items():
        lo[j] = v
    for j, v in upper.items():
        hi[j] = v
    return LinearProgram(c, A, [row_kind[r] for r in row_order], [rhs.get(r, 0.0) for r in row_order], lo, hi)


def _fin(v: float):
    return float(v) if np.isfinite(v) else None


def lp_to_dict(p: LinearProgram) -> dict:
    A = p.A.tocsr()
    rows = []
    for i in range(p.n_rows):
        sl = slice(A.indptr[i], A.indptr[i + 1])
        rows.append({"cols": A.indices[sl].tolist(), "vals": A.data[sl].tolist(),
                     "sense": str(p.sense[i]), "rhs": float(p.rhs[i])})
    return {"format": "smoothro-lp", "version": 1, "c": p.c.tolist(), "rows": rows,
            "lower": [_fin(v) for v in p.lower], "upper": [_fin(v) for v in p.upper]}


def lp_from_dict(d: dict) -> LinearProgram:
    nv = len(d["c"])
    r, k, v = [], [], []
    for i, row in enumerate(d["rows"]):
        r += [i] * len(row["cols"])
        k += row["cols"]
        v += row["vals"]
    A = sparse.coo_matrix((v, (r, k)), shape=(len(d["rows"]), nv)).tocsr()
    lo = [-np.inf if x is None else x for x in d["lower"]]
    hi = [np.inf if x is None else x for x in d["upper"]]
    return LinearProgram(d["c"], A, [row["sense"] for row in d["rows"]], [row["rhs"] for row in d["rows"]], lo, hi)


def write_lp_json(p: LinearProgram, path) -> None:
    Path(path).write_text(json.dumps(lp_to_dict(p)))


def read_lp_json(path) -> LinearProgram:
    return lp_from_dict(json.loads(Path(path).read_text()))
