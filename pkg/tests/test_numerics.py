import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pairbandit.errors import DimensionMismatch, InfeasibleRegion, NotSPD
from pairbandit.numerics import (
    cholesky,
    cholesky_solve,
    constrained_ridge,
    det_ratio_rank_one,
    project_box_halfspaces,
    ridge_objective,
)


def random_spd(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T + n * np.eye(n)


def test_cholesky_solve_examples():
    np.testing.assert_allclose(cholesky_solve(np.eye(2), np.array([1.0, 2.0])), [1, 2])
    np.testing.assert_allclose(cholesky_solve(np.diag([2.0, 4.0]), np.array([2.0, 4.0])), [1, 1])


@pytest.mark.parametrize("n", [1, 5, 17, 64])
def test_cholesky_solve_residual(n):
    rng = np.random.default_rng(n)
    A = random_spd(rng, n)
    b = rng.normal(size=n)
    x = cholesky_solve(A, b)
    assert np.max(np.abs(A @ x - b)) <= 1e-9 * (1 + np.max(np.abs(b)))


def test_not_spd_and_dimension_errors():
    with pytest.raises(NotSPD):
        cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(NotSPD):
        cholesky(np.array([[1.0, 2.0], [0.0, 1.0]]))  # not symmetric
    with pytest.raises(DimensionMismatch):
        cholesky_solve(np.eye(2), np.ones(3))


def test_det_ratio_examples():
    phi = np.array([0.5, 0.5])  # |phi|^2 = 0.5
    assert det_ratio_rank_one(np.eye(2), phi, 2) == pytest.approx(2.0)
    assert det_ratio_rank_one(np.eye(3), np.zeros(3), 7) == 1.0


@pytest.mark.parametrize("n", range(1, 9))
def test_det_ratio_matches_explicit(n):
    rng = np.random.default_rng(100 + n)
    L = random_spd(rng, n)
    phi = rng.normal(size=n)
    explicit = np.linalg.det(L + 3 * np.outer(phi, phi)) / np.linalg.det(L)
    assert det_ratio_rank_one(L, phi, 3) == pytest.approx(explicit, rel=1e-10)


def test_constrained_ridge_scalar_examples():
    th = constrained_ridge([1], [[1.0]], [0.5], 10.0)
    assert th == pytest.approx([0.25])
    th = constrained_ridge([1], [[1.0]], [0.5], 0.1)
    assert np.linalg.norm(th) == pytest.approx(0.1, rel=1e-8)
    assert np.linalg.norm(th) <= 0.1


def test_constrained_ridge_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        constrained_ridge([1, 2], [[1.0, 0.0]], [0.5, 0.2], 1.0)


def projected_gradient(w, F, y, B, iters=20000):
    A = np.eye(F.shape[1]) + F.T @ (w[:, None] * F)
    b = F.T @ (w * y)
    step = 1.0 / np.linalg.eigvalsh(A)[-1]
    th = np.zeros(F.shape[1])
    for _ in range(iters):
        th = th - step * (A @ th - b)
        nrm = np.linalg.norm(th)
        if nrm > B:
            th *= B / nrm
    return th


@pytest.mark.parametrize("seed", range(5))
def test_constrained_ridge_vs_projected_gradient(seed):
    rng = np.random.default_rng(seed)
    m, nu = 12, 6
    w = rng.integers(1, 20, m).astype(float)
    F = rng.normal(size=(m, nu))
    y = rng.normal(size=m) * 3
    B = 0.3
    th = constrained_ridge(w, F, y, B)
    ref = projected_gradient(w, F, y, B)
    assert np.linalg.norm(th) <= B * (1 + 1e-8)
    assert ridge_objective(th, w, F, y) <= ridge_objective(ref, w, F, y) + 1e-8


def test_projection_examples():
    u = np.array([0.3, 0.4])
    assert np.array_equal(project_box_halfspaces(u, 0, 1), u)
    np.testing.assert_allclose(project_box_halfspaces([1.5, -0.2], 0, 1), [1, 0])
    np.testing.assert_allclose(
        project_box_halfspaces([1.0, 1.0], 0, 1, [((1.0, 1.0), 1.0)]), [0.5, 0.5], atol=1e-9
    )


def test_projection_infeasible():
    with pytest.raises(InfeasibleRegion):
        project_box_halfspaces([0.5, 0.5], 0, 1, [((1.0, 1.0), -1.0)])


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-2, 3), min_size=3, max_size=3),
    st.lists(st.floats(0.1, 1), min_size=3, max_size=3),
    st.floats(0.4, 2.0),
)
def test_projection_feasible_fixed_point(u, a, c):
    hs = [(tuple(a), c), ((1.0, -1.0, 0.0), 0.5)]
    x = project_box_halfspaces(np.array(u), 0.0, 1.0, hs)
    assert np.all(x >= -1e-9) and np.all(x <= 1 + 1e-9)
    for ai, ci in hs:
        assert np.dot(ai, x) <= ci + 1e-9
    np.testing.assert_allclose(project_box_halfspaces(x, 0.0, 1.0, hs), x, atol=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_projection_is_optimal(seed):
    from scipy.optimize import minimize

    rng = np.random.default_rng(seed)
    u = rng.uniform(-1, 2, 4)
    hs = [(tuple(rng.uniform(0.1, 1, 4)), 1.0), (tuple(rng.normal(size=4)), 0.3)]
    x = project_box_halfspaces(u, 0.0, 1.0, hs)
    cons = [{"type": "ineq", "fun": lambda z, a=np.array(a), c=c: c - a @ z} for a, c in hs]
    ref = minimize(lambda z: np.sum((z - u) ** 2), np.full(4, 0.1), bounds=[(0, 1)] * 4,
                   constraints=cons, method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    assert np.sum((x - u) ** 2) <= ref.fun + 1e-7
