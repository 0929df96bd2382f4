"""Batched LinUCB on one cube, driven by pairwise comparisons against a baseline.

A batch repeats one comparison until the determinant of the design matrix
more than doubles, so the number of policy updates stays logarithmic in the
budget. :func:`iterative_batch_lin_ucb` restarts it on doubling budgets, each
epoch using the previous epoch's output as the comparison baseline.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from pairbandit.geometry import Cube, FeatureMap, cube_grid
from pairbandit.numerics import cholesky, quad_form_inv, ridge_from_normal
from pairbandit.oracle import PairwiseOracle

ZERO_VARIANCE = 1e-14


@dataclass(frozen=True)
class UcbConfig:
    """Constants for one BatchLinUCB run.

    ``mode`` selects how the confidence width C1' is built from (M, C1, C2):
    ``theoretical`` uses the analysis constants, ``practical`` the lighter
    recommended ones. ``index_cap`` clips the UCB index (defaults to ``M``).
    """

    k: int
    M: float
    C1: float
    C2: float
    T: int
    mode: str = "practical"
    G: int = 10
    index_cap: float | None = None
    c1p_scale: float = 1.0

    def __post_init__(self):
        if self.mode not in ("theoretical", "practical"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def cap(self) -> float:
        return self.M if self.index_cap is None else self.index_cap

    def c1_prime(self, nu: int, N: int) -> float:
        tau_inf = tau_infinity(nu, N)
        if self.mode == "theoretical":
            c = (
                2 * self.M * math.sqrt(nu)
                + 2 * self.C2 * math.sqrt(tau_inf * N)
                + 2 * math.sqrt(self.C1 * tau_inf)
            )
        else:
            c = (
                math.sqrt(nu) * math.log(max(self.T, 2))
                + self.C2 * math.sqrt(tau_inf * N)
                + math.sqrt(self.C1 * tau_inf)
            )
        return self.c1p_scale * c


def tau_infinity(nu: int, N: int) -> float:
    """Upper bound nu*log2(2*N*nu) on the number of batches in one run."""
    return nu * math.log2(2 * N * nu)


@dataclass
class RidgeState:
    Lam: np.ndarray
    b: np.ndarray
    theta: np.ndarray
    N_remaining: int
    history: list[tuple[int, np.ndarray, float]] = field(default_factory=list)

    @classmethod
    def initial(cls, nu: int, N: int) -> "RidgeState":
        return cls(np.eye(nu), np.zeros(nu), np.zeros(nu), int(N))

    def update(self, n: int, phi: np.ndarray, target: float, norm_bound: float) -> None:
        self.history.append((n, phi.copy(), target))
        self.N_remaining -= n
        self.Lam += n * np.outer(phi, phi)
        self.b += n * target * phi
        self.theta = ridge_from_normal(self.Lam, self.b, norm_bound)

    def rebuilt_design(self) -> np.ndarray:
        Lam = np.eye(self.Lam.shape[0])
        for n, phi, _ in self.history:
            Lam += n * np.outer(phi, phi)
        return Lam


def batch_size(Lam_or_factor, phi: np.ndarray, N_remaining: int) -> int:
    """Smallest n with det(Lam + n phi phi^T) > 2 det(Lam), capped at the remaining budget.

    By the determinant lemma the condition is ``n * phi^T Lam^{-1} phi > 1``.
    Accepts either the matrix or a ``cho_factor`` pair.
    """
    if N_remaining < 1:
        raise ValueError("N_remaining must be at least 1")
    factor = Lam_or_factor if isinstance(Lam_or_factor, tuple) else cholesky(Lam_or_factor)
    s = float(quad_form_inv(factor, phi)[0])
    return _batch_from_variance(s, N_remaining)


def _batch_from_variance(s: float, N_remaining: int) -> int:
    if s <= ZERO_VARIANCE:
        return N_remaining
    return min(N_remaining, math.floor(1.0 / s) + 1)


@functools.lru_cache(maxsize=1024)
def _grid_features(cube: Cube, k: int, G: int) -> tuple[np.ndarray, np.ndarray, FeatureMap]:
    pts = cube_grid(cube, G)
    fm = FeatureMap.for_cube(cube, k)
    Phi = fm(pts)
    Phi.setflags(write=False)
    return pts, Phi, fm


def ucb_indices(state: RidgeState, D: np.ndarray, c1p: float, C2: float, cap: float,
                factor=None) -> tuple[np.ndarray, np.ndarray]:
    """Clipped UCB index for each row of the feature-difference matrix ``D``.

    Returns ``(index, variance)`` where variance is ``D Lam^{-1} D^T`` row-wise.
    """
    if factor is None:
        factor = cholesky(state.Lam)
    var = quad_form_inv(factor, D)
    index = np.minimum(cap, D @ state.theta + c1p * np.sqrt(np.maximum(var, 0.0)) + C2)
    return index, var


def ucb_argmax(state: RidgeState, fm: FeatureMap, cube: Cube, x_s, cfg: UcbConfig,
               N: int | None = None) -> np.ndarray:
    """Grid point maximizing the clipped UCB index; ties go to the lowest grid index.

    ``N`` is the run budget used in C1' (defaults to the state's remaining budget).
    """
    pts = cube_grid(cube, cfg.G)
    D = fm(pts) - fm(np.asarray(x_s, dtype=float))
    nu = D.shape[1]
    c1p = cfg.c1_prime(nu, N if N is not None else max(state.N_remaining, 1))
    index, _ = ucb_indices(state, D, c1p, cfg.C2, cfg.cap)
    return pts[int(np.argmax(index))].copy()


@dataclass
class LinUcbRun:
    x: np.ndarray
    n: list[int]
    points: list[np.ndarray]
    targets: list[float]
    state: RidgeState
    c1_prime: float
    indices: list[np.ndarray] | None = None

    @property
    def batches(self) -> int:
        return len(self.n)


def batch_lin_ucb(cube: Cube, x_s, N: int, cfg: UcbConfig, oracle: PairwiseOracle,
                  record_indices: bool = False) -> LinUcbRun:
    """Run batched LinUCB on ``cube`` with baseline ``x_s`` for exactly ``N`` periods."""
    if N < 1:
        raise ValueError("N must be at least 1")
    pts, Phi, fm = _grid_features(cube, cfg.k, cfg.G)
    x_s = np.asarray(x_s, dtype=float)
    D = Phi - fm(x_s)
    nu = fm.nu
    c1p = cfg.c1_prime(nu, N)
    norm_bound = cfg.M * math.sqrt(nu)
    state = RidgeState.initial(nu, N)
    run = LinUcbRun(x_s.copy(), [], [], [], state, c1p, [] if record_indices else None)

    while state.N_remaining > 0:
        factor = cholesky(state.Lam)
        index, var = ucb_indices(state, D, c1p, cfg.C2, cfg.cap, factor)
        i = int(np.argmax(index))
        n = _batch_from_variance(float(var[i]), state.N_remaining)
        reply = oracle.invoke(n, pts[i], x_s)
        # reply.y estimates f(x_s) - f(x_i); the model is linear in f(x_i) - f(x_s)
        state.update(n, D[i], -reply.y, norm_bound)
        run.n.append(n)
        run.points.append(pts[i])
        run.targets.append(-reply.y)
        if record_indices:
            run.indices.append(index)

    limit = tau_infinity(nu, N)
    if run.batches > limit:
        raise AssertionError(f"{run.batches} batches exceed the bound {limit:.1f}")
    run.x = run.points[int(np.argmax(run.n))].copy()
    return run


@dataclass
class IterativeRun:
    x: np.ndarray
    epochs: list[LinUcbRun]
    committed: int


def iterative_batch_lin_ucb(cube: Cube, N: int, cfg: UcbConfig,
                            oracle: PairwiseOracle) -> IterativeRun:
    """Doubling epochs of :func:`batch_lin_ucb`, then commit the last output for the rest of ``N``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    beta0 = (N + 1).bit_length() - 2  # floor(log2(N + 1)) - 1
    x = cube.anchor.copy()
    epochs = []
    spent = 0
    for beta in range(1, beta0 + 1):
        run = batch_lin_ucb(cube, x, 2**beta, cfg, oracle)
        epochs.append(run)
        spent += 2**beta
        x = run.x
    committed = oracle.commit(N - spent, x, x)
    return IterativeRun(x.copy(), epochs, committed)
