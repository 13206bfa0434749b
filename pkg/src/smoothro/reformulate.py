"""Deterministic counterparts of a robust LP over a smooth set.

Variables of every reformulated program are laid out as ``[x, y, auxiliaries]``.

* same-sign rows: one row at ``upper`` (all rows of C nonnegative) or ``lower`` (all nonpositive),
* singleton rows: ``n`` rows, one per candidate worst-case scenario,
* dualization: per robust row, ``alpha >= 0`` over the canonical set rows with
  ``sum_l alpha_l a_l = C_i x`` and ``b^T alpha + d_i^T y <= c_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import PatternMismatchError
from .lp import EQ, LE, LinearProgram, LPBuilder, lp_to_dict, write_lp_json, write_mps
from .model import (ALL_NONNEG, ALL_NONPOS, MIXED, SINGLETON_NEG, SINGLETON_POS, RobustLP, SignPattern,
                    model_patterns, sign_pattern)
from .sets import SmoothSet, constraint_rows

COMPACT_FIRST = "compact_first"
DUALIZE_ALL = "dualize_all"
STRATEGIES = (COMPACT_FIRST, DUALIZE_ALL)

RULE_SAME_SIGN = "same_sign"
RULE_SINGLETON = "singleton"
RULE_DUAL = "dualize"


@dataclass(frozen=True, eq=False)
class CompactForm:
    """Rows ``scenario^T C x + d^T y <= c``, one per scenario."""
    rule: str
    pattern: str
    scenarios: np.ndarray     # k x n
    A_x: np.ndarray           # k x n_x
    A_y: np.ndarray           # k x n_y
    rhs: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.rhs.size


def _resolve(C, pattern, set_: SmoothSet) -> SignPattern:
    if pattern is None:
        pattern = sign_pattern(C)
    if pattern.n != set_.n:
        raise PatternMismatchError(f"pattern over {pattern.n} rows for a set of dimension {set_.n}")
    return pattern


def _rows_at(scenarios: np.ndarray, C, d, c, rule: str, label: str) -> CompactForm:
    C = sparse.csr_matrix(C)
    A_x = np.asarray((sparse.csr_matrix(scenarios) @ C).toarray())
    k = scenarios.shape[0]
    d = np.asarray(d, dtype=float).reshape(-1)
    return CompactForm(rule, label, scenarios, A_x, np.tile(d, (k, 1)), np.full(k, float(c)))


def reformulate_same_sign(constraint, set_: SmoothSet, pattern: SignPattern | None = None) -> CompactForm:
    C, d, c = constraint
    p = _resolve(C, pattern, set_)
    if p.kind == ALL_NONNEG:
        scen = set_.upper
    elif p.kind == ALL_NONPOS:
        scen = set_.lower
    else:
        raise PatternMismatchError(f"same-sign form needs all_nonneg or all_nonpos, got {p.label()}")
    return _rows_at(scen.reshape(1, -1), C, d, c, RULE_SAME_SIGN, p.label())


def singleton_scenarios(set_: SmoothSet, j: int, positive: bool = True) -> np.ndarray:
    """The ``n`` candidate worst cases when only row ``j`` can push the constraint up (or down).

    Positive case: levels ``t`` in ``{upper_j} U {min(lower_l + dist(l,j), upper_j) : l != j}``,
    with ``delta_j = t`` and ``delta_k = max(lower_k, t - dist(k,j))``.  The negative case
    mirrors it with ``min``/``upper``.  Infinite distances collapse to the box bound.
    """
    n = set_.n
    lo, hi, dist = set_.lower, set_.upper, set_.dist
    dj = dist[:, j]
    fin = np.isfinite(dj)
    others = np.delete(np.arange(n), j)
    if positive:
        t_l = np.where(fin, lo + np.where(fin, dj, 0.0), hi[j])
        levels = np.concatenate([[hi[j]], np.minimum(t_l[others], hi[j])])
        shifted = levels[:, None] - np.where(fin, dj, 0.0)[None, :]
        scen = np.where(fin[None, :], np.maximum(lo[None, :], shifted), lo[None, :])
    else:
        t_l = np.where(fin, hi - np.where(fin, dj, 0.0), lo[j])
        levels = np.concatenate([[lo[j]], np.maximum(t_l[others], lo[j])])
        shifted = levels[:, None] + np.where(fin, dj, 0.0)[None, :]
        scen = np.where(fin[None, :], np.minimum(hi[None, :], shifted), hi[None, :])
    scen[:, j] = levels
    return scen


def reformulate_singleton(constraint, set_: SmoothSet, pattern: SignPattern | None = None) -> CompactForm:
    C, d, c = constraint
    p = _resolve(C, pattern, set_)
    if p.kind not in (SINGLETON_POS, SINGLETON_NEG):
        raise PatternMismatchError(f"singleton form needs singleton_pos or singleton_neg, got {p.label()}")
    scen = singleton_scenarios(set_, p.index, positive=p.kind == SINGLETON_POS)
    return _rows_at(scen, C, d, c, RULE_SINGLETON, p.label())


def reformulate_compact(constraint, set_: SmoothSet, pattern: SignPattern | None = None) -> CompactForm:
    p = _resolve(constraint[0], pattern, set_)
    if p.kind in (ALL_NONNEG, ALL_NONPOS):
        return reformulate_same_sign(constraint, set_, p)
    if p.kind in (SINGLETON_POS, SINGLETON_NEG):
        return reformulate_singleton(constraint, set_, p)
    raise PatternMismatchError(f"no compact form for pattern {p.label()}")


# ---------------------------------------------------------------------------
# program assembly


@dataclass
class ReformulatedLP:
    lp: LinearProgram
    n_x: int
    n_y: int
    provenance: list = field(default_factory=list)

    def split(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=float)
        return z[:self.n_x], z[self.n_x:self.n_x + self.n_y]

    @property
    def n_dual_vars(self) -> int:
        return sum(p["vars"][1] - p["vars"][0] for p in self.provenance)

    def counts(self) -> dict:
        return {"vars": self.lp.n_vars, "cons": self.lp.n_rows, "dual_vars": self.n_dual_vars}

    def to_dict(self) -> dict:
        return {"lp": lp_to_dict(self.lp), "n_x": self.n_x, "n_y": self.n_y, "provenance": self.provenance}

    def write_json(self, path) -> None:
        write_lp_json(self.lp, path)

    def write_mps(self, path) -> None:
        write_mps(self.lp, path)


def base_builder(model: RobustLP) -> tuple[LPBuilder, np.ndarray, np.ndarray]:
    """Builder holding ``x``, ``y`` and the deterministic rows of ``model``."""
    b = LPBuilder()
    xi = b.add_vars(model.n_x, model.f, model.x_lower, model.x_upper)
    yi = b.add_vars(model.n_y, model.g, model.y_lower, model.y_upper)
    if model.n_z:
        D = sparse.hstack([model.F, model.H]).tocoo()
        b.add_rows(D.row, D.col, D.data, model.sense, model.h)
    return b, xi, yi


def add_compact(b: LPBuilder, form: CompactForm, xi, yi) -> np.ndarray:
    A = sparse.coo_matrix(np.hstack([form.A_x, form.A_y]))
    cols = np.concatenate([xi, yi])[A.col]
    return b.add_rows(A.row, cols, A.data, LE, form.rhs)


def add_dual_block(b: LPBuilder, C, d, c, xi, yi, A_set, b_set, subset=None) -> tuple[np.ndarray, np.ndarray, int]:
    """Dual certificate over the set rows ``subset`` (all rows by default).

    Returns the alpha variable indices, the ``n`` balance rows and the budget row.
    """
    A_set = sparse.csr_matrix(A_set)
    L = A_set.shape[0] if subset is None else None
    subset = np.arange(L) if subset is None else np.asarray(subset, dtype=np.int64)
    ai = b.add_vars(subset.size, 0.0, 0.0, np.inf)
    n = A_set.shape[1]
    # balance: sum_l alpha_l a_l - C x = 0
    At = A_set[subset].T.tocoo()
    Cc = sparse.coo_matrix(C)
    rows = np.concatenate([At.row, Cc.row])
    cols = np.concatenate([ai[At.col], np.asarray(xi)[Cc.col]])
    vals = np.concatenate([At.data, -Cc.data])
    eq = b.add_rows(rows, cols, vals, EQ, np.zeros(n))
    d = np.asarray(d, dtype=float).reshape(-1)
    nz = np.flatnonzero(d)
    budget = b.add_row(np.concatenate([ai, np.asarray(yi)[nz]]), np.concatenate([b_set[subset], d[nz]]), LE, c)
    return ai, eq, budget


def _record(prov, i, name, rule, pattern, rows, vars_=(0, 0)):
    rows = np.atleast_1d(rows)
    prov.append({"constraint": i, "name": name, "rule": rule, "pattern": pattern,
                 "rows": [int(rows[0]), int(rows[-1]) + 1] if rows.size else [0, 0],
                 "vars": [int(vars_[0]), int(vars_[1])]})


def dualize(model: RobustLP, set_: SmoothSet) -> ReformulatedLP:
    return auto_reformulate(model, set_, DUALIZE_ALL)


def auto_reformulate(model: RobustLP, set_: SmoothSet, strategy: str = COMPACT_FIRST,
                     patterns: list | None = None) -> ReformulatedLP:
    """Compact rows where the sign pattern admits them, dual blocks elsewhere.

    ``patterns`` optionally overrides the inferred sign pattern per robust row.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    b, xi, yi = base_builder(model)
    A_set, b_set = constraint_rows(set_, as_sparse=True)
    pats = patterns if patterns is not None else (model_patterns(model) if strategy == COMPACT_FIRST else
                                                   [None] * model.m)
    prov: list = []
    for i in range(model.m):
        cons = (model.C[i], model.d[i], model.c[i])
        p = pats[i] if strategy == COMPACT_FIRST else None
        if p is not None and p.kind != MIXED:
            form = reformulate_compact(cons, set_, p)
            rows = add_compact(b, form, xi, yi)
            _record(prov, i, model.names[i], form.rule, form.pattern, rows)
        else:
            ai, eq, budget = add_dual_block(b, *cons, xi, yi, A_set, b_set)
            label = p.label() if p is not None else "unchecked"
            _record(prov, i, model.names[i], RULE_DUAL, label, np.append(eq, budget),
                    (ai[0], ai[-1] + 1) if ai.size else (0, 0))
    return ReformulatedLP(b.build(), model.n_x, model.n_y, prov)
