"""Dense linear-algebra and small convex-solver primitives.

Everything here is a pure function over caller-owned arrays. SPD systems are
always solved through a Cholesky factorization; no explicit inverses.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import linalg as sla
from scipy.optimize import linprog

from pairbandit.errors import DimensionMismatch, InfeasibleRegion, NotSPD

RIDGE_REL_TOL = 1e-13  # norm band; tighter than needed so the objective gap stays below 1e-8
RIDGE_MAX_ITER = 200
DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_ITER = 10_000

Halfspace = tuple[Sequence[float], float]


def cholesky(A: np.ndarray) -> tuple[np.ndarray, bool]:
    """Factor ``A`` and return a ``cho_factor`` pair, raising NotSPD on failure."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * scale):
        raise NotSPD("matrix is not symmetric")
    try:
        return sla.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotSPD(str(exc)) from exc


def cholesky_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    factor = cholesky(A)
    if factor[0].shape[0] != b.shape[0]:
        raise DimensionMismatch(f"A is {factor[0].shape}, b has length {b.shape[0]}")
    return sla.cho_solve(factor, b)


def quad_form_inv(factor: tuple[np.ndarray, bool], V: np.ndarray) -> np.ndarray:
    """Row-wise ``v^T A^{-1} v`` for each row ``v`` of ``V`` given A's Cholesky factor."""
    V = np.atleast_2d(V)
    W = sla.solve_triangular(factor[0], V.T, lower=factor[1], check_finite=False)
    return np.einsum("ij,ij->j", W, W)


def det_ratio_rank_one(Lam: np.ndarray, phi: np.ndarray, n: int) -> float:
    """det(Lam + n phi phi^T) / det(Lam), by the matrix determinant lemma."""
    phi = np.asarray(phi, dtype=float)
    factor = cholesky(Lam)
    if factor[0].shape[0] != phi.shape[0]:
        raise DimensionMismatch("phi length does not match Lam")
    return 1.0 + n * float(quad_form_inv(factor, phi)[0])


def ridge_objective(theta, weights, features, targets) -> float:
    r = np.asarray(targets) - np.asarray(features) @ theta
    return float(np.sum(np.asarray(weights) * r * r) + theta @ theta)


def ridge_from_normal(A: np.ndarray, b: np.ndarray, norm_bound: float) -> np.ndarray:
    """Minimize ``theta^T A theta - 2 b^T theta`` over the ball ``||theta|| <= norm_bound``.

    ``A`` must already include the identity regularizer. The unconstrained
    solution is taken when it is feasible; otherwise the multiplier on
    ``||theta||^2`` is found by bisection on the secular equation.
    """
    if norm_bound <= 0:
        raise ValueError("norm_bound must be positive")
    theta = cholesky_solve(A, b)
    if np.linalg.norm(theta) <= norm_bound:
        return theta
    # eigh diagonalizes the whole multiplier path, so each bisection step is O(nu)
    w, Q = np.linalg.eigh(A)
    c = Q.T @ b

    def norm_at(lam: float) -> float:
        return float(np.linalg.norm(c / (w + lam)))

    lo, hi = 0.0, float(np.linalg.norm(b)) / norm_bound
    while norm_at(hi) > norm_bound:
        hi *= 2.0
    lower_target = norm_bound * (1.0 - RIDGE_REL_TOL)
    for _ in range(RIDGE_MAX_ITER):
        mid = 0.5 * (lo + hi)
        r = norm_at(mid)
        if r > norm_bound:
            lo = mid
        else:
            hi = mid
            if r >= lower_target:
                break
    return Q @ (c / (w + hi))


def constrained_ridge(weights, features, targets, norm_bound: float) -> np.ndarray:
    """Weighted ridge regression with a Euclidean norm bound on the coefficients.

    Minimizes ``sum_j n_j (y_j - <theta, phi_j>)^2 + ||theta||^2`` subject to
    ``||theta|| <= norm_bound``.
    """
    weights = np.asarray(weights, dtype=float).ravel()
    targets = np.asarray(targets, dtype=float).ravel()
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[0] != weights.shape[0] or targets.shape[0] != weights.shape[0]:
        raise DimensionMismatch(
            f"{weights.shape[0]} weights, {features.shape[0]} feature rows, "
            f"{targets.shape[0]} targets"
        )
    if weights.size == 0:
        raise ValueError("at least one observation is required")
    A = np.eye(features.shape[1]) + (features.T * weights) @ features
    b = features.T @ (weights * targets)
    return ridge_from_normal(A, b, norm_bound)


def _project_halfspace(x: np.ndarray, a: np.ndarray, c: float, aa: float) -> np.ndarray:
    excess = a @ x - c
    if excess <= 0:
        return x
    return x - (excess / aa) * a


def _violation(x, lo, hi, A, c) -> float:
    v = max(float(np.max(lo - x)), float(np.max(x - hi)), 0.0)
    if A is not None:
        v = max(v, float(np.max(A @ x - c)))
    return v


def _region_is_feasible(lo, hi, A, c) -> bool:
    res = linprog(
        np.zeros(lo.shape[0]), A_ub=A, b_ub=c, bounds=list(zip(lo, hi)), method="highs"
    )
    return res.status == 0


def project_box_halfspaces(
    u, lo, hi, halfspaces: Sequence[Halfspace] = ()
) -> np.ndarray:
    """Euclidean projection of ``u`` onto ``{lo <= x <= hi, a.x <= c for each (a, c)}``.

    Uses Dykstra's alternating projections; with no halfspaces this is a clip.
    """
    u = np.asarray(u, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), u.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), u.shape)
    if np.any(lo > hi):
        raise InfeasibleRegion("box has lo > hi")
    if not halfspaces:
        return np.clip(u, lo, hi)

    A = np.array([np.asarray(a, dtype=float) for a, _ in halfspaces])
    c = np.array([float(ci) for _, ci in halfspaces])
    if A.shape[1] != u.shape[0]:
        raise DimensionMismatch("halfspace normal length does not match the point")
    if _violation(u, lo, hi, A, c) <= 0:
        return u.copy()
    norms = np.einsum("ij,ij->i", A, A)

    x = u.copy()
    incr = np.zeros((len(halfspaces) + 1, u.shape[0]))
    for _ in range(DYKSTRA_MAX_ITER):
        x_prev, incr_prev = x, incr.copy()
        z = x + incr[0]
        y = np.clip(z, lo, hi)
        incr[0] = z - y
        x = y
        for i in range(len(halfspaces)):
            z = x + incr[i + 1]
            y = _project_halfspace(z, A[i], c[i], norms[i]) if norms[i] > 0 else z
            incr[i + 1] = z - y
            x = y
        # x can repeat over a cycle while the increments still move
        if max(np.max(np.abs(x - x_prev)), np.max(np.abs(incr - incr_prev))) <= DYKSTRA_TOL:
            break

    if _violation(x, lo, hi, A, c) > 1e-9:
        if not _region_is_feasible(lo, hi, A, c):
            raise InfeasibleRegion("box and halfspaces have empty intersection")
        # Dykstra ends on the last halfspace; a final clip keeps the box exact
        x = np.clip(x, lo, hi)
    return x
