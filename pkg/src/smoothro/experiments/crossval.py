"""Cross-validated membership of range-based smooth sets against corrected-covariance ellipsoids.

Smooth sets use ``gamma_ii = alpha * w_ii`` and ``gamma_ij = beta * w_ij`` around the mid-range;
ellipsoids use ``(1 - rho) Sigma + rho D`` around the training mean with radius ``Omega``.
Sizes are compared through the surrogate ``(alpha, beta)`` of each ellipsoid.
"""

from __future__ import annotations

import math

import numpy as np

from ..calibration import FoldStats, RangeBased, as_scenarios, gamma_from_scenarios, membership_fraction, \
    surrogate_terms
from ..errors import DomainError, EmptySetError
from ..sets import EllipsoidSet, build, complete_edges

DEFAULT_ALPHA = (0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)
DEFAULT_BETA = (0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)
DEFAULT_RHO = (0.1, 0.3, 0.5, 0.7, 0.9)
DEFAULT_OMEGA = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)


def fold_indices(S: int, folds: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic ``(train, validation)`` index pairs from one seeded permutation."""
    if folds < 2:
        raise DomainError("need at least two folds")
    if S < folds:
        raise DomainError(f"{S} rows cannot be split into {folds} folds")
    perm = np.random.default_rng(seed).permutation(S)
    parts = np.array_split(perm, folds)
    return [(np.sort(np.concatenate(parts[:k] + parts[k + 1:])), np.sort(parts[k])) for k in range(folds)]


def standardize(D) -> np.ndarray:
    """Columns shifted to mean 0 and scaled to unit standard deviation (constant columns only shifted)."""
    d = as_scenarios(D)
    sd = d.std(axis=0)
    return (d - d.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def low_rank_scenarios(S: int = 42, n: int = 40, rank: int = 3, noise: float = 0.3, seed: int = 0) -> np.ndarray:
    """Standardized data from ``rank`` smooth spatial factors plus idiosyncratic noise, rows ``S << n``."""
    rng = np.random.default_rng(seed)
    pos = np.linspace(0.0, 1.0, n)
    centers = rng.uniform(0.0, 1.0, rank)
    W = np.exp(-((pos[None, :] - centers[:, None]) ** 2) / (2 * 0.2 ** 2)) * rng.uniform(0.5, 1.5, (rank, 1))
    Z = rng.standard_t(5, size=(S, rank))
    return standardize(Z @ W + noise * rng.normal(size=(S, n)))


def size_at_level(sizes, probs, level: float = 0.95) -> float:
    """Smallest size whose membership probability reaches ``level`` (``inf`` if none)."""
    sizes = np.asarray(sizes, dtype=float)
    ok = np.asarray(probs, dtype=float) >= level
    return float(sizes[ok].min()) if ok.any() else math.inf


def crossval_membership_study(D, folds: int = 7, alpha_grid=DEFAULT_ALPHA, beta_grid=DEFAULT_BETA,
                              rho_grid=DEFAULT_RHO, omega_grid=DEFAULT_OMEGA, seed: int = 0, edges=None,
                              level: float = 0.95) -> dict:
    """Fold-averaged validation membership per smooth ``(alpha, beta)`` and ellipsoid ``(rho, Omega)``."""
    d = as_scenarios(D)
    n = d.shape[1]
    edges = complete_edges(n) if edges is None else edges
    splits = fold_indices(d.shape[0], folds, seed)
    stats = [FoldStats.from_training(d[tr], edges) for tr, _ in splits]
    smooth = np.zeros((len(alpha_grid), len(beta_grid)))
    ellip = np.zeros((len(rho_grid), len(omega_grid)))
    for (tr, va), fs in zip(splits, stats):
        for a, alpha in enumerate(alpha_grid):
            for b, beta in enumerate(beta_grid):
                try:
                    s = build(gamma_from_scenarios(d[tr], RangeBased(alpha, beta), edges))
                except EmptySetError:
                    continue    # an empty set holds no validation point
                smooth[a, b] += membership_fraction(s, d[va])
        for r, rho in enumerate(rho_grid):
            sig = fs.corrected_sigma(rho)
            for o, omega in enumerate(omega_grid):
                ellip[r, o] += membership_fraction(EllipsoidSet(sig, omega, fs.mean), d[va])
    smooth /= folds
    ellip /= folds
    smooth_rows = [{"alpha": float(al), "beta": float(be), "prob": float(smooth[a, b])}
                   for a, al in enumerate(alpha_grid) for b, be in enumerate(beta_grid)]
    ellip_rows = []
    for r, rho in enumerate(rho_grid):
        a0, a1, b0, b1 = surrogate_terms(stats, rho)
        for o, omega in enumerate(omega_grid):
            ellip_rows.append({"rho": float(rho), "omega": float(omega), "alpha": a0 + omega * a1,
                               "beta": b0 + omega * b1,
                               "prob": float(ellip[r, o])})
    at_level = {}
    for name, rows in (("smooth", smooth_rows), ("ellipsoid", ellip_rows)):
        probs = [row["prob"] for row in rows]
        at_level[name] = {"alpha": size_at_level([row["alpha"] for row in rows], probs, level),
                          "beta": size_at_level([row["beta"] for row in rows], probs, level)}
    return {"folds": folds, "seed": seed, "n": n, "rows": int(d.shape[0]), "level": level,
            "smooth": smooth_rows, "ellipsoid": ellip_rows, "size_at_level": at_level}


def smooth_smaller_at_level(report: dict) -> bool:
    """Whether the smooth set reaches the level at strictly smaller alpha and beta than the ellipsoid."""
    s, e = report["size_at_level"]["smooth"], report["size_at_level"]["ellipsoid"]
    return s["alpha"] < e["alpha"] and s["beta"] < e["beta"]
