"""Robust LP representation, validation and sign-pattern analysis.

A :class:`RobustLP` is

    min  f^T x + g^T y
    s.t. delta^T C_i x + d_i^T y <= c_i   for all delta in the set,  i = 1..m
         F x + H y (sense) h
         x_lower <= x <= x_upper,  y_lower <= y <= y_upper

with ``C_i`` an ``n x n_x`` matrix over the uncertainty dimension ``n``.
Construction only coerces types; :func:`validate` reports inconsistencies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from scipy import sparse

from .errors import DimensionError, DomainError, UnsupportedFeatureError
from .lp import LE, _norm_sense

SCHEMA_VERSION = 1

ALL_NONNEG = "all_nonneg"
ALL_NONPOS = "all_nonpos"
SINGLETON_POS = "singleton_pos"
SINGLETON_NEG = "singleton_neg"
MIXED = "mixed"
PATTERNS = (ALL_NONNEG, ALL_NONPOS, SINGLETON_POS, SINGLETON_NEG, MIXED)


def _csr(a, shape=None) -> sparse.csr_matrix:
    if a is None:
        return sparse.csr_matrix(shape)
    if sparse.issparse(a):
        return sparse.csr_matrix(a, dtype=float)
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1) if shape is None else a.reshape(shape)
    return sparse.csr_matrix(a)


def _vec(v, k: int, default: float) -> np.ndarray:
    if v is None:
        return np.full(k, default)
    out = np.asarray(v, dtype=float).reshape(-1)
    if out.size == 1 and k != 1:
        out = np.full(k, float(out[0]))
    return out


@dataclass(frozen=True, eq=False)
class RobustLP:
    n: int
    f: np.ndarray
    g: np.ndarray
    C: tuple
    d: np.ndarray
    c: np.ndarray
    F: sparse.csr_matrix | None = None
    H: sparse.csr_matrix | None = None
    h: np.ndarray | None = None
    sense: np.ndarray | None = None
    x_lower: np.ndarray | None = None
    x_upper: np.ndarray | None = None
    y_lower: np.ndarray | None = None
    y_upper: np.ndarray | None = None
    x_integer: np.ndarray | None = None
    y_integer: np.ndarray | None = None
    names: tuple = field(default=())

    def __post_init__(self):
        put = lambda k, v: object.__setattr__(self, k, v)
        f = np.asarray(self.f, dtype=float).reshape(-1)
        g = np.asarray(self.g, dtype=float).reshape(-1)
        nx, ny = f.size, g.size
        put("n", int(self.n))
        put("f", f)
        put("g", g)
        blocks = tuple(_csr(Ci) for Ci in self.C)
        m = len(blocks)
        put("C", blocks)
        d = np.asarray(self.d if self.d is not None else np.zeros((m, ny)), dtype=float)
        put("d", d.reshape(m, -1) if d.size or m else np.zeros((0, ny)))
        put("c", np.asarray(self.c, dtype=float).reshape(-1))
        h = np.zeros(0) if self.h is None else np.asarray(self.h, dtype=float).reshape(-1)
        nz = h.size
        put("h", h)
        put("F", _csr(self.F, (nz, nx)))
        put("H", _csr(self.H, (nz, ny)))
        sense = np.full(nz, LE, dtype="<U2") if self.sense is None else \
            np.array([_norm_sense(s) for s in np.atleast_1d(self.sense)], dtype="<U2")
        put("sense", sense)
        put("x_lower", _vec(self.x_lower, nx, 0.0))
        put("x_upper", _vec(self.x_upper, nx, np.inf))
        put("y_lower", _vec(self.y_lower, ny, 0.0))
        put("y_upper", _vec(self.y_upper, ny, np.inf))
        put("x_integer", np.zeros(nx, bool) if self.x_integer is None else np.asarray(self.x_integer, bool).reshape(-1))
        put("y_integer", np.zeros(ny, bool) if self.y_integer is None else np.asarray(self.y_integer, bool).reshape(-1))
        names = tuple(self.names) if self.names else tuple(f"u{i}" for i in range(m))
        put("names", names)
        for a in (f, g, self.d, self.c, h, self.x_lower, self.x_upper, self.y_lower, self.y_upper):
            a.setflags(write=False)

    @property
    def n_x(self) -> int:
        return self.f.size

    @property
    def n_y(self) -> int:
        return self.g.size

    @property
    def m(self) -> int:
        return len(self.C)

    @property
    def n_z(self) -> int:
        return self.h.size

    @property
    def has_integers(self) -> bool:
        return bool(self.x_integer.any() or self.y_integer.any())

    def objective(self, x, y) -> float:
        return float(self.f @ np.asarray(x, float) + self.g @ np.asarray(y, float))

    def coefficient(self, i: int, x) -> np.ndarray:
        """The vector ``C_i x`` multiplying delta in robust row ``i``."""
        return np.asarray(self.C[i] @ np.asarray(x, dtype=float)).reshape(-1)

    def uncertain_lhs(self, i: int, delta, x, y) -> float:
        return float(np.asarray(delta, float) @ self.coefficient(i, x) + self.d[i] @ np.asarray(y, float))

    def deterministic_violation(self, x, y) -> float:
        """Largest violation of the deterministic rows and variable bounds (0 if feasible)."""
        x, y = np.asarray(x, float), np.asarray(y, float)
        act = self.F @ x + self.H @ y
        v = np.where(self.sense == LE, act - self.h, np.where(self.sense == ">=", self.h - act, np.abs(act - self.h)))
        vb = np.concatenate([self.x_lower - x, x - self.x_upper, self.y_lower - y, y - self.y_upper])
        return float(max(np.max(v, initial=0.0), np.max(vb, initial=0.0)))

    def scenario_violation(self, delta, x, y) -> np.ndarray:
        """``delta^T C_i x + d_i^T y - c_i`` for every robust row."""
        return np.array([self.uncertain_lhs(i, delta, x, y) for i in range(self.m)]) - self.c

    def to_dict(self) -> dict:
        fin = lambda a: [None if not np.isfinite(v) else float(v) for v in a]
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n, "n_x": self.n_x, "n_y": self.n_y,
            "f": self.f.tolist(), "g": self.g.tolist(),
            "uncertain": [{"C": Ci.toarray().tolist(), "d": self.d[i].tolist(), "c": float(self.c[i]),
                           "name": self.names[i]} for i, Ci in enumerate(self.C)],
            "deterministic": {"F": self.F.toarray().tolist(), "H": self.H.toarray().tolist(),
                              "h": self.h.tolist(), "sense": self.sense.tolist()},
            "x_lower": fin(self.x_lower), "x_upper": fin(self.x_upper),
            "y_lower": fin(self.y_lower), "y_upper": fin(self.y_upper),
            "x_integer": self.x_integer.tolist(), "y_integer": self.y_integer.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RobustLP":
        jsonschema.validate(data, model_schema())
        nx, ny = data["n_x"], data["n_y"]
        unc = data["uncertain"]
        det = data["deterministic"]
        bnd = lambda key, k, inf: None if key not in data else \
            [inf if v is None else v for v in data[key]] if data[key] else np.zeros(k)
        nz = len(det["h"])
        return cls(
            n=data["n"], f=data["f"], g=data["g"],
            C=[np.asarray(u["C"], dtype=float).reshape(-1, nx) for u in unc],
            d=np.asarray([u["d"] for u in unc], dtype=float).reshape(len(unc), ny),
            c=[u["c"] for u in unc],
            F=np.asarray(det["F"], dtype=float).reshape(nz, nx),
            H=np.asarray(det["H"], dtype=float).reshape(nz, ny),
            h=det["h"], sense=det["sense"] or None,
            x_lower=bnd("x_lower", nx, -np.inf), x_upper=bnd("x_upper", nx, np.inf),
            y_lower=bnd("y_lower", ny, -np.inf), y_upper=bnd("y_upper", ny, np.inf),
            x_integer=data.get("x_integer") or None, y_integer=data.get("y_integer") or None,
            names=tuple(u.get("name", f"u{i}") for i, u in enumerate(unc)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RobustLP":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "RobustLP":
        return cls.from_json(Path(path).read_text())


def model_schema() -> dict:
    text = resources.files("smoothro").joinpath("schemas/robust_lp.schema.json").read_text()
    return json.loads(text)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Finding:
    kind: str            # dimension | finiteness | bounds | integrality
    severity: str        # error | warning
    message: str
    constraint: int | None = None


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple = ()

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {"ok": self.ok, "findings": [vars(f) for f in self.findings]}

    def raise_errors(self) -> None:
        errs = self.errors
        if not errs:
            return
        first = errs[0]
        exc = DimensionError if first.kind == "dimension" else DomainError
        raise exc("; ".join(f.message for f in errs))


def validate(model: RobustLP, set_=None) -> ValidationReport:
    """Dimension, finiteness, bound and integrality checks against an optional set."""
    out: list[Finding] = []
    err = lambda kind, msg, i=None: out.append(Finding(kind, "error", msg, i))
    nx, ny, n = model.n_x, model.n_y, model.n
    if set_ is not None and set_.n != n:
        err("dimension", f"model uncertainty dimension {n} differs from set dimension {set_.n}")
    if model.d.shape != (model.m, ny):
        err("dimension", f"d has shape {model.d.shape}, expected {(model.m, ny)}")
    if model.c.size != model.m:
        err("dimension", f"c has {model.c.size} entries for {model.m} robust constraints")
    for i, Ci in enumerate(model.C):
        if Ci.shape != (n, nx):
            err("dimension", f"robust constraint {i} has C of shape {Ci.shape}, expected {(n, nx)}", i)
        elif not np.all(np.isfinite(Ci.data)):
            err("finiteness", f"robust constraint {i} has non-finite C entries", i)
    if model.d.shape == (model.m, ny):
        for i in np.flatnonzero(~np.all(np.isfinite(model.d), axis=1)):
            err("finiteness", f"robust constraint {int(i)} has non-finite d entries", int(i))
    if model.c.size == model.m:
        for i in np.flatnonzero(~np.isfinite(model.c)):
            err("finiteness", f"robust constraint {int(i)} has non-finite right-hand side", int(i))
    nz = model.n_z
    if model.F.shape != (nz, nx) or model.H.shape != (nz, ny) or model.sense.size != nz:
        err("dimension", f"deterministic block shapes F{model.F.shape} H{model.H.shape} "
                         f"sense({model.sense.size}) inconsistent with h({nz}), n_x={nx}, n_y={ny}")
    for name, a in (("f", model.f), ("g", model.g), ("h", model.h), ("F", model.F.data), ("H", model.H.data)):
        if not np.all(np.isfinite(a)):
            err("finiteness", f"{name} has non-finite entries")
    for name, lo, hi, k in (("x", model.x_lower, model.x_upper, nx), ("y", model.y_lower, model.y_upper, ny)):
        if lo.size != k or hi.size != k:
            err("dimension", f"{name} bounds have sizes {lo.size}/{hi.size}, expected {k}")
            continue
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo == np.inf) or np.any(hi == -np.inf):
            err("finiteness", f"{name} bounds contain NaN or impossible infinities")
        elif np.any(lo > hi):
            err("bounds", f"{name} has lower bound above upper bound at {np.flatnonzero(lo > hi).tolist()}")
    for name, flags, k in (("x", model.x_integer, nx), ("y", model.y_integer, ny)):
        if flags.size != k:
            err("dimension", f"{name} integrality flags have size {flags.size}, expected {k}")
        elif flags.any():
            out.append(Finding("integrality", "warning",
                               f"{int(flags.sum())} {name} variables flagged integer; LP solvers reject them"))
    return ValidationReport(tuple(out))


def require_continuous(model: RobustLP) -> None:
    if model.has_integers:
        raise UnsupportedFeatureError("integer variables are not supported by the LP-based solvers")


# ---------------------------------------------------------------------------
# sign patterns


@dataclass(frozen=True, eq=False)
class SignPattern:
    kind: str
    index: int | None
    nonneg: np.ndarray      # row j in S+
    nonpos: np.ndarray      # row j in S-
    pos: np.ndarray         # row j in S++
    neg: np.ndarray         # row j in S--

    def __post_init__(self):
        kind, index = _classify(self.nonneg, self.nonpos, self.pos, self.neg)
        if (kind, index) != (self.kind, self.index):
            raise DomainError(f"pattern {self.kind}({self.index}) inconsistent with the sign flags")

    @property
    def n(self) -> int:
        return self.nonneg.size

    @property
    def compact(self) -> bool:
        return self.kind != MIXED

    def label(self) -> str:
        return self.kind if self.index is None else f"{self.kind}({self.index})"

    @classmethod
    def from_flags(cls, nonneg, nonpos, pos, neg) -> "SignPattern":
        arrs = [np.asarray(a, dtype=bool).copy() for a in (nonneg, nonpos, pos, neg)]
        kind, index = _classify(*arrs)
        return cls(kind, index, *arrs)


def _classify(nonneg, nonpos, pos, neg) -> tuple[str, int | None]:
    if nonneg.all():
        return ALL_NONNEG, None
    if nonpos.all():
        return ALL_NONPOS, None
    if pos.sum() == 1:
        j = int(np.flatnonzero(pos)[0])
        if np.delete(nonpos, j).all():
            return SINGLETON_POS, j
    if neg.sum() == 1:
        j = int(np.flatnonzero(neg)[0])
        if np.delete(nonneg, j).all():
            return SINGLETON_NEG, j
    return MIXED, None


def sign_pattern(C, lower_bounds=None) -> SignPattern:
    """Classify the rows of ``C`` by entrywise signs, sound for ``x >= lower_bounds >= 0``.

    Only variables with a nonzero column in ``C`` must have nonnegative lower bounds.
    """
    C = _csr(C)
    dense = C.toarray()
    if lower_bounds is not None:
        lb = np.asarray(lower_bounds, dtype=float).reshape(-1)
        if lb.size != dense.shape[1]:
            raise DimensionError(f"{lb.size} lower bounds for {dense.shape[1]} columns")
        used = np.any(dense != 0.0, axis=0)
        bad = np.flatnonzero(used & ~(lb >= 0.0))
        if bad.size:
            raise DomainError(f"sign inference needs x >= 0; variables {bad.tolist()} have negative lower bounds")
    nonneg = np.all(dense >= 0.0, axis=1)
    nonpos = np.all(dense <= 0.0, axis=1)
    pos = nonneg & np.any(dense > 0.0, axis=1)
    neg = nonpos & np.any(dense < 0.0, axis=1)
    return SignPattern.from_flags(nonneg, nonpos, pos, neg)


def model_patterns(model: RobustLP) -> list[SignPattern | None]:
    """Sign pattern per robust row, or ``None`` where inference is unsound (negative bounds)."""
    out = []
    for Ci in model.C:
        try:
            out.append(sign_pattern(Ci, model.x_lower))
        except DomainError:
            out.append(None)
    return out
