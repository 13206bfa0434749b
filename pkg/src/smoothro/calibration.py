"""Sizing smooth sets from a covariance matrix or from observed scenarios.

Covariance rules set ``gamma_ij = multiplier * sqrt(e_ij^T Sigma e_ij)`` for every
vertex (``i == j``) and listed edge, with the multiplier fixed by the rule and
the target violation probability ``p``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError
from .numerics import as_symmetric, chi2_quantile, jacobi_eigh, normal_quantile, psd_factor
from .sets import UncertaintyGraph, complete_edges

RULES = ("chebyshev_joint", "single_violation", "normal_chi2", "normal_union", "normal_best",
         "ellipsoid_enclosing")


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p!r}")
    return p


@dataclass(frozen=True)
class CalibrationRule:
    kind: str
    p: float
    m_constraints: int = 1

    def __post_init__(self):
        if self.kind not in RULES:
            raise DomainError(f"unknown calibration rule {self.kind!r}")
        _check_p(self.p)
        if int(self.m_constraints) != self.m_constraints or self.m_constraints < 1:
            raise DomainError("m_constraints must be a positive integer")


def multiplier(rule: CalibrationRule, n: int, n_edges: int, dof: int | None = None) -> float:
    """Scale factor applied to ``||Sigma^{1/2} e_ij||``.

    ``dof`` overrides ``n`` as the chi-square degrees of freedom (effective rank
    of a singular covariance).
    """
    p = rule.p
    dof = n if dof is None else dof
    if rule.kind == "chebyshev_joint":
        return math.sqrt(n / p)
    if rule.kind == "single_violation":
        val = rule.m_constraints / p - 1.0
        if val < 0:
            raise DomainError("m_constraints / p must be at least 1")
        return math.sqrt(val)
    chi = math.sqrt(chi2_quantile(1.0 - p, dof))
    alpha = p / (n_edges + n)
    union = normal_quantile(1.0 - alpha / 2.0)
    if rule.kind == "normal_chi2":
        return chi
    if rule.kind == "normal_union":
        return union
    if rule.kind == "normal_best":
        return min(chi, union)
    raise DomainError("ellipsoid_enclosing needs an explicit radius; use enclosing_gamma")


def _edge_array(edges) -> np.ndarray:
    return np.array(list(edges), dtype=int).reshape(-1, 2)


def _diff_norms(sigma: np.ndarray, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diag = np.sqrt(np.maximum(np.diag(sigma), 0.0))
    if edges.size == 0:
        return diag, np.zeros(0)
    i, j = edges[:, 0], edges[:, 1]
    q = sigma[i, i] + sigma[j, j] - 2.0 * sigma[i, j]
    return diag, np.sqrt(np.maximum(q, 0.0))


def _check_covariance(sigma) -> tuple[np.ndarray, int]:
    sig = as_symmetric(sigma)
    rank = psd_factor(sig).shape[1]
    if not np.allclose(np.diag(sig), 1.0, atol=1e-8):
        warnings.warn("covariance is not standardized (unit diagonal expected)", stacklevel=3)
    return sig, rank


def gamma_from_covariance(sigma, edges, rule: CalibrationRule) -> UncertaintyGraph:
    """Smooth-set parameters (nominal 0) calibrated by ``rule``."""
    sig, rank = _check_covariance(sigma)
    n = sig.shape[0]
    edges = _edge_array(edges)
    mult = multiplier(rule, n, edges.shape[0], dof=rank)
    diag, diff = _diff_norms(sig, edges)
    return UncertaintyGraph(np.zeros(n), mult * diag, edges, mult * diff)


def enclosing_gamma(sigma, omega: float, edges) -> UncertaintyGraph:
    """Smallest smooth set of the given graph containing ``{delta^T Sigma^{-1} delta <= omega}``."""
    if omega < 0:
        raise DomainError("omega must be nonnegative")
    sig = as_symmetric(sigma)
    psd_factor(sig)
    edges = _edge_array(edges)
    diag, diff = _diff_norms(sig, edges)
    r = math.sqrt(omega)
    return UncertaintyGraph(np.zeros(sig.shape[0]), r * diag, edges, r * diff)


def rotated_box_radius(p: float, n: int, rule: str = "general") -> float:
    p = _check_p(p)
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    if rule == "general":
        return math.sqrt(n / p)
    if rule == "normal":
        return min(math.sqrt(chi2_quantile(1.0 - p, n)), normal_quantile(1.0 - p / (2.0 * n)))
    raise DomainError(f"unknown rotated box rule {rule!r}")


def violation_bound(R: float) -> float:
    """A priori single-constraint violation bound ``1 / (1 + R^2)``."""
    if R < 0:
        raise DomainError("radius must be nonnegative")
    if math.isinf(R):
        return 0.0
    return 1.0 / (1.0 + R * R)


# scenario-based schemes


@dataclass(frozen=True)
class MaxBased:
    lam: float
    lam2: float


@dataclass(frozen=True)
class StdevBased:
    lam: float
    lam2: float


@dataclass(frozen=True)
class RangeBased:
    alpha: float
    beta: float
    node_floor: float = 1.0
    edge_floor: float = 0.01


def as_scenarios(D) -> np.ndarray:
    d = np.array(D, dtype=float)
    if d.ndim != 2 or d.shape[0] < 2:
        raise DimensionError("scenario matrix needs at least two rows")
    if not np.all(np.isfinite(d)):
        raise DomainError("scenario matrix has non-finite entries")
    return d


def normalize_columns(D) -> tuple[np.ndarray, np.ndarray]:
    """Column means and the data divided by them."""
    d = as_scenarios(D)
    mean = d.mean(axis=0)
    if np.any(mean == 0):
        raise DomainError(f"column {int(np.flatnonzero(mean == 0)[0])} has zero mean; cannot normalize")
    return mean, d / mean


def pairwise_abs_diff_stats(d: np.ndarray, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per edge: max and mean over rows of ``|d_i - d_j|``."""
    if edges.size == 0:
        return np.zeros(0), np.zeros(0)
    diff = np.abs(d[:, edges[:, 0]] - d[:, edges[:, 1]])
    return diff.max(axis=0), diff.mean(axis=0)


def gamma_from_scenarios(D, scheme, edges=None) -> UncertaintyGraph:
    """Calibrate a smooth set from scenario rows.

    ``MaxBased`` and ``StdevBased`` work on column-normalized data (nominal 1);
    ``RangeBased`` uses the raw data with the mid-range as nominal.
    """
    d = as_scenarios(D)
    n = d.shape[1]
    edges = _edge_array(complete_edges(n) if edges is None else edges)
    if isinstance(scheme, MaxBased):
        _check_nonneg(scheme.lam, scheme.lam2)
        _, dt = normalize_columns(d)
        node = scheme.lam * (dt.max(axis=0) - 1.0)
        mx, mean = pairwise_abs_diff_stats(dt, edges)
        return UncertaintyGraph(np.ones(n), np.maximum(node, 0.0), edges, scheme.lam2 * (mx - mean) + mean)
    if isinstance(scheme, StdevBased):
        _check_nonneg(scheme.lam, scheme.lam2)
        _, dt = normalize_columns(d)
        sig = np.cov(dt, rowvar=False).reshape(n, n)
        diag, diff = _diff_norms(sig, edges)
        return UncertaintyGraph(np.ones(n), scheme.lam * diag, edges, scheme.lam2 * diff)
    if isinstance(scheme, RangeBased):
        _check_nonneg(scheme.alpha, scheme.beta)
        st = range_stats(d, edges, scheme.node_floor, scheme.edge_floor)
        return UncertaintyGraph(st.nominal, scheme.alpha * st.w_node, edges, scheme.beta * st.w_edge)
    raise DomainError(f"unknown scenario scheme {scheme!r}")


def _check_nonneg(*vals):
    if any(v < 0 for v in vals):
        raise DomainError("scheme parameters must be nonnegative")


@dataclass(frozen=True)
class RangeStats:
    mean: np.ndarray
    nominal: np.ndarray
    w_node: np.ndarray
    w_edge: np.ndarray


def range_stats(D, edges, node_floor: float = 1.0, edge_floor: float = 0.01) -> RangeStats:
    d = as_scenarios(D)
    hi, lo = d.max(axis=0), d.min(axis=0)
    mx, _ = pairwise_abs_diff_stats(d, _edge_array(edges))
    return RangeStats(d.mean(axis=0), 0.5 * (hi + lo), np.maximum(0.5 * (hi - lo), node_floor),
                      np.maximum(mx, edge_floor))


@dataclass(frozen=True)
class FoldStats:
    """Training statistics of one cross-validation fold."""

    mean: np.ndarray
    nominal: np.ndarray
    w_node: np.ndarray
    w_edge: np.ndarray
    edges: np.ndarray
    sigma: np.ndarray
    d_diag: np.ndarray

    @classmethod
    def from_training(cls, D, edges=None, node_floor: float = 1.0, edge_floor: float = 0.01) -> "FoldStats":
        d = as_scenarios(D)
        edges = _edge_array(complete_edges(d.shape[1]) if edges is None else edges)
        st = range_stats(d, edges, node_floor, edge_floor)
        sig = np.cov(d, rowvar=False).reshape(d.shape[1], d.shape[1])
        return cls(st.mean, st.nominal, st.w_node, st.w_edge, edges, sig, np.maximum(1.0, np.diag(sig)))

    def corrected_sigma(self, rho: float) -> np.ndarray:
        return (1.0 - rho) * self.sigma + rho * np.diag(self.d_diag)


def inv_sqrt_psd(sigma) -> np.ndarray:
    w, v = jacobi_eigh(sigma)
    if np.any(w <= 0):
        raise DomainError("corrected covariance is singular")
    return (v / np.sqrt(w)) @ v.T


def surrogate_terms(folds: Sequence[FoldStats], rho: float) -> tuple[float, float, float, float]:
    """Averaged ``(alpha_0, alpha_1, beta_0, beta_1)`` with surrogate ``alpha = alpha_0 + Omega alpha_1``."""
    if not 0.0 < rho <= 1.0:
        raise DomainError("rho must lie in (0, 1]")
    if not folds:
        raise DomainError("need at least one fold")
    acc = None
    for f in folds:
        m = inv_sqrt_psd(f.corrected_sigma(rho))
        i, j = f.edges[:, 0], f.edges[:, 1]
        cols = m[:, i] - m[:, j]
        terms = [np.abs(f.mean - f.nominal) / f.w_node, np.diag(m) / f.w_node,
                 np.abs(f.mean[i] - f.mean[j]) / f.w_edge, np.linalg.norm(cols, axis=0) / f.w_edge]
        acc = terms if acc is None else [x + t for x, t in zip(acc, terms)]
    L = len(folds)
    return tuple(float(np.mean(x / L)) if x.size else 0.0 for x in acc)


def surrogate_ellipsoid_params(folds: Sequence[FoldStats], rho: float, omega: float) -> tuple[float, float]:
    """Average surrogate ``(alpha, beta)`` of the corrected-covariance ellipsoid."""
    a0, a1, b0, b1 = surrogate_terms(folds, rho)
    return a0 + omega * a1, b0 + omega * b1


def membership_fraction(set_like, validation, tol: float = 1e-9) -> float:
    """Fraction of validation rows inside ``set_like`` (anything with ``contains_many``)."""
    v = np.array(validation, dtype=float)
    if v.ndim != 2 or v.shape[1] != set_like.n:
        raise DimensionError(f"validation rows must have length {set_like.n}")
    if v.shape[0] == 0:
        return 0.0
    return float(np.mean(set_like.contains_many(v, tol)))


# ingestion


def read_scenarios_csv(path, delimiter: str = ",") -> np.ndarray:
    """One scenario per row; a non-numeric first row is treated as a header."""
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text), delimiter=delimiter) if r and any(c.strip() for c in r)]
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    return as_scenarios([[float(c) for c in r] for r in rows])


def write_scenarios_csv(path, D, delimiter: str = ",", header: Sequence[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        if header is not None:
            w.writerow(header)
        for row in np.asarray(D, dtype=float):
            w.writerow([repr(float(x)) for x in row])


def read_covariance_json(path) -> np.ndarray:
    return as_symmetric(json.loads(Path(path).read_text()))
