"""Volume and diameter of covariance-calibrated uncertainty sets for ``Sigma_ij = rho^|i-j|``."""

from __future__ import annotations

import numpy as np

from ..calibration import CalibrationRule, enclosing_gamma, gamma_from_covariance, rotated_box_radius
from ..errors import DomainError
from ..numerics import chi2_quantile
from ..sets import (EllipsoidSet, RotatedBoxSet, box_volume, build, complete_edges, ellipsoid_geometry, mc_volume,
                    polytope_diameter, rotated_box_geometry)


def toeplitz_covariance(n: int, rho: float) -> np.ndarray:
    idx = np.arange(n)
    return float(rho) ** np.abs(idx[:, None] - idx[None, :])


def _smooth_row(dist, name, s, samples, seed):
    vol, se = mc_volume(s.contains_many, (s.lower, s.upper), samples=samples, seed=seed)
    return {"distribution": dist, "set": name, "volume": vol, "volume_se": se,
            "diameter": polytope_diameter(s), "method": "monte_carlo"}


def set_comparison_report(n: int = 5, p: float = 0.01, rho: float = 0.2, samples: int = 10_000_000,
                          seed: int = 0) -> dict:
    """Rows for the ellipsoid, smooth sets, enclosing box and rotated box under both sizing regimes."""
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie in (0, 1)")
    if n > 8:
        raise DomainError("diameters need vertex enumeration; n must be at most 8")
    if not 0.0 <= rho < 1.0:
        raise DomainError("rho must lie in [0, 1)")
    sigma = toeplitz_covariance(n, rho)
    edges = complete_edges(n)
    rows = []
    regimes = (("general", n / p, rotated_box_radius(p, n, "general")),
               ("normal", chi2_quantile(1.0 - p, n), rotated_box_radius(p, n, "normal")))
    for k, (dist, omega, r) in enumerate(regimes):
        vol, diam = ellipsoid_geometry(EllipsoidSet(sigma, omega))
        base = {"distribution": dist, "set": "U_E", "volume": vol, "volume_se": 0.0, "diameter": diam,
                "method": "closed_form", "omega": omega}
        rows.append(base)
        s_e = build(enclosing_gamma(sigma, omega, edges))
        rows.append(_smooth_row(dist, "U_S^E", s_e, samples, seed + 10 * k))
        if dist == "normal":
            s_z = build(gamma_from_covariance(sigma, edges, CalibrationRule("normal_union", p)))
            rows.append(_smooth_row(dist, "U_S^Z", s_z, samples, seed + 10 * k + 1))
        rows.append({"distribution": dist, "set": "enclosing_box", "volume": box_volume(s_e.lower, s_e.upper),
                     "volume_se": 0.0, "diameter": float(np.linalg.norm(s_e.upper - s_e.lower)),
                     "method": "closed_form"})
        rv, rd = rotated_box_geometry(RotatedBoxSet(sigma, r))
        rows.append({"distribution": dist, "set": "U_RB", "volume": rv, "volume_se": 0.0, "diameter": rd,
                     "method": "closed_form", "radius": r})
        for row in rows:
            if row["distribution"] == dist:
                row["volume_ratio"] = row["volume"] / base["volume"]
    return {"n": n, "p": p, "rho": rho, "samples": samples, "seed": seed, "rows": rows}


def format_table(report: dict) -> str:
    lines = [f"n={report['n']} p={report['p']} rho={report['rho']}"]
    for r in report["rows"]:
        lines.append(f"{r['distribution']:8s} {r['set']:14s} {r['volume']:10.3g} ({r['volume_ratio']:.2f})"
                     f"  {r['diameter']:8.2f}")
    return "\n".join(lines)


