"""Scalar quantiles and small dense symmetric-matrix routines.

Everything here is a pure function of its inputs.  Matrices are plain
``numpy.ndarray`` objects; :func:`as_symmetric` is the single entry point
that validates and symmetrizes them.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import DimensionError, DomainError, IndefiniteMatrixError, NotPositiveDefiniteError

PSD_TOL = 1e-8
SYMMETRY_TOL = 1e-10

# Acklam's rational approximation of the inverse normal CDF.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _acklam_lower(q: float) -> float:
    # valid for 0 < q <= 0.5
    if q < _P_LOW:
        t = math.sqrt(-2.0 * math.log(q))
        num = ((((_C[0] * t + _C[1]) * t + _C[2]) * t + _C[3]) * t + _C[4]) * t + _C[5]
        den = (((_D[0] * t + _D[1]) * t + _D[2]) * t + _D[3]) * t + 1.0
        return num / den
    r = q - 0.5
    s = r * r
    num = (((((_A[0] * s + _A[1]) * s + _A[2]) * s + _A[3]) * s + _A[4]) * s + _A[5]) * r
    den = ((((_B[0] * s + _B[1]) * s + _B[2]) * s + _B[3]) * s + _B[4]) * s + 1.0
    return num / den


def normal_quantile(q: float) -> float:
    """Inverse of the standard normal CDF.

    Rational approximation followed by one Newton step on ``Phi(z) - q``;
    absolute error stays below 1e-9 on ``[1e-12, 1 - 1e-12]``.
    """
    q = float(q)
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {q!r}")
    if q > 0.5:
        # 1 - q is exact here (Sterbenz), so the upper tail keeps full precision.
        return -normal_quantile(1.0 - q)
    z = _acklam_lower(q)
    return z - (normal_cdf(z) - q) / normal_pdf(z)


def _chi2_logpdf(t: float, dof: int) -> float:
    k = 0.5 * dof
    return (k - 1.0) * math.log(t) - 0.5 * t - k * math.log(2.0) - math.lgamma(k)


def chi2_quantile(q: float, dof: int) -> float:
    """Quantile of the chi-square distribution with ``dof`` degrees of freedom.

    Brackets the root of the regularized incomplete gamma function, then
    alternates safeguarded Newton steps with bisection.  Upper-tail levels are
    solved against the complementary function to avoid cancellation.
    """
    q = float(q)
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {q!r}")
    if int(dof) != dof or dof < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {dof!r}")
    dof = int(dof)
    k = 0.5 * dof
    upper = q > 0.5
    target = 1.0 - q if upper else q

    def resid(t: float) -> float:
        # increasing in t in both branches
        if upper:
            return target - special.gammaincc(k, 0.5 * t)
        return special.gammainc(k, 0.5 * t) - target

    lo, hi = 0.0, max(1.0, float(dof))
    while resid(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
    t = 0.5 * (lo + hi)
    for _ in range(200):
        f = resid(t)
        if f == 0.0:
            return t
        if f < 0.0:
            lo = t
        else:
            hi = t
        step = f / math.exp(_chi2_logpdf(t, dof)) if t > 0.0 else math.inf
        cand = t - step
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        if abs(cand - t) <= 1e-15 * cand or hi - lo <= 1e-15 * hi:
            return cand
        t = cand
    return t


def as_symmetric(a, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Validate a square, numerically symmetric matrix and return an exactly symmetric copy."""
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if np.max(np.abs(m - m.T), initial=0.0) > tol * scale:
        raise DomainError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def quad_form_diff(sigma: np.ndarray, i: int, j: int) -> float:
    """``e_ij^T Sigma e_ij`` with ``e_ij = e_i - e_j`` (or ``e_i`` when i == j).

    Its square root equals ``||Sigma^{1/2} e_ij||`` without forming a square root.
    """
    n = sigma.shape[0]
    if not (0 <= i < n and 0 <= j < n):
        raise DimensionError(f"index pair ({i}, {j}) out of range for order {n}")
    if i == j:
        return float(sigma[i, i])
    return float(sigma[i, i] + sigma[j, j] - 2.0 * sigma[i, j])


def cholesky(sigma) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == Sigma``."""
    a = as_symmetric(sigma)
    n = a.shape[0]
    L = np.zeros_like(a)
    scale = max(float(np.max(np.abs(np.diag(a)), initial=0.0)), 1e-300)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d <= 1e-14 * scale:
            raise NotPositiveDefiniteError(j, float(d))
        L[j, j] = math.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Rounds of disjoint index pairs covering every pair once (circle method, padded to even)."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p = np.array(players[:m // 2])
        q = np.array(players[m // 2:][::-1])
        keep = (p < n) & (q < n)
        lo, hi = np.minimum(p, q)[keep], np.maximum(p, q)[keep]
        rounds.append((lo, hi))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(sigma, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once in round-robin order, applying a
    round's disjoint rotations together.  Returns eigenvalues in descending order and
    the matching orthonormal eigenvectors as columns.
    """
    a = as_symmetric(sigma).copy()
    n = a.shape[0]
    v = np.eye(n)
    total = float(np.sum(a * a))
    if n > 1 and total > 0.0:
        rounds = _round_robin(n)
        for _ in range(max_sweeps):
            off = 2.0 * float(np.sum(np.triu(a, 1) ** 2))
            if off <= 1e-30 * total:
                break
            for p, q in rounds:
                apq = a[p, q]
                act = np.abs(apq) > 1e-300
                if not act.any():
                    continue
                p, q, apq = p[act], q[act], apq[act]
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                big = np.abs(theta) > 1e150
                safe = np.where(big, 1.0, theta)
                t = np.where(big, 0.5 / np.where(big, theta, 1.0),
                             np.where(safe >= 0, 1.0, -1.0) / (np.abs(safe) + np.sqrt(safe * safe + 1.0)))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c[:, None] * ap - s[:, None] * aq
                a[q, :] = s[:, None] * ap + c[:, None] * aq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def max_eigenvalue(sigma, tol: float = 1e-13, max_iter: int = 20000) -> float:
    """Largest eigenvalue by power iteration on the (shifted if needed) matrix."""
    a = as_symmetric(sigma)
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    # Gershgorin lower bound; shift only when an eigenvalue could be negative
    radius = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))
    shift = max(0.0, -float(np.min(np.diag(a) - radius)))
    b = a + shift * np.eye(n)
    norm = float(np.max(np.sum(np.abs(b), axis=1)))
    if norm == 0.0:
        return 0.0
    v = np.ones(n) + 1e-3 * np.arange(n) / n
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = b @ v
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return -shift
        resid = np.linalg.norm(w - lam_new * v)
        v = w / nw
        if resid <= tol * norm and abs(lam_new - lam) <= tol * norm:
            return lam_new - shift
        lam = lam_new
    # slow convergence (tiny spectral gap): fall back to the full decomposition
    return float(jacobi_eigh(a)[0][0])


def psd_factor(sigma, rank_tol: float = 1e-10) -> np.ndarray:
    """Factor ``R`` (n x q) with ``R @ R.T == Sigma`` for positive semidefinite ``Sigma``.

    Eigen-directions whose eigenvalue falls below ``rank_tol * lambda_max``
    are dropped, so ``q = R.shape[1]`` is the effective rank.
    """
    a = as_symmetric(sigma)
    w, v = jacobi_eigh(a)
    top = float(w[0]) if w.size else 0.0
    scale = max(float(np.max(np.abs(a), initial=0.0)), 1e-300)
    if w.size and w[-1] < -PSD_TOL * scale:
        raise IndefiniteMatrixError(f"matrix has eigenvalue {w[-1]:.3e} < 0")
    keep = w > rank_tol * max(top, 0.0)
    if not np.any(keep):
        return np.zeros((a.shape[0], 0))
    return v[:, keep] * np.sqrt(w[keep])
