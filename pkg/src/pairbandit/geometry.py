"""Domains, cube partitions and the local polynomial feature map."""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from pairbandit.errors import EmptyCube, FeatureDimOverflow

FEATURE_DIM_CAP = 10_000
FEASIBILITY_TOL = 1e-12


@dataclass(frozen=True)
class Domain:
    """An axis-aligned box inside [0, 1]^d, optionally cut by halfspaces ``a.x <= c``.

    ``interior_margin`` is the distance kept from the box faces by iterates
    that need room for finite-difference probes.
    """

    box: tuple[tuple[float, float], ...]
    halfspaces: tuple[tuple[tuple[float, ...], float], ...] = ()
    interior_margin: float = 0.0

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "box", box)
        hs = tuple((tuple(float(v) for v in a), float(c)) for a, c in self.halfspaces)
        object.__setattr__(self, "halfspaces", hs)
        for i, (lo, hi) in enumerate(box):
            if not (0.0 <= lo < hi <= 1.0):
                raise ValueError(f"box[{i}] = ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1")
            if hi - lo <= 2 * self.interior_margin:
                raise ValueError(f"interior margin leaves box[{i}] empty")
        for a, _ in hs:
            if len(a) != len(box):
                raise ValueError("halfspace normal has the wrong dimension")
        if self.interior_margin < 0:
            raise ValueError("interior_margin must be nonnegative")

    @classmethod
    def unit(cls, d: int, interior_margin: float = 0.0, halfspaces=()) -> "Domain":
        return cls(((0.0, 1.0),) * d, halfspaces, interior_margin)

    @property
    def d(self) -> int:
        return len(self.box)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.box])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.box])

    @property
    def interior_lo(self) -> np.ndarray:
        return self.lo + self.interior_margin

    @property
    def interior_hi(self) -> np.ndarray:
        return self.hi - self.interior_margin

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def in_box(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def in_feasible(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        """Membership in Z (the halfspaces only)."""
        x = np.asarray(x, dtype=float)
        return all(np.dot(a, x) <= c + tol for a, c in self.halfspaces)

    def feasible_mask(self, X: np.ndarray, tol: float = FEASIBILITY_TOL) -> np.ndarray:
        mask = np.all(X >= self.lo - tol, axis=1) & np.all(X <= self.hi + tol, axis=1)
        for a, c in self.halfspaces:
            mask &= X @ np.asarray(a) <= c + tol
        return mask

    def interior_is_feasible(self) -> bool:
        if not self.halfspaces:
            return True
        A = np.array([a for a, _ in self.halfspaces])
        c = np.array([c for _, c in self.halfspaces])
        res = linprog(
            np.zeros(self.d),
            A_ub=A,
            b_ub=c,
            bounds=list(zip(self.interior_lo, self.interior_hi)),
            method="highs",
        )
        return res.status == 0


@dataclass(frozen=True)
class Cube:
    """Cell ``j`` (1-based per coordinate) of the J^d partition, clipped to the domain."""

    j: tuple[int, ...]
    J: int
    domain: Domain

    def __post_init__(self):
        object.__setattr__(self, "j", tuple(int(v) for v in self.j))
        if len(self.j) != self.domain.d:
            raise ValueError("cube index has the wrong dimension")
        if any(not 1 <= v <= self.J for v in self.j):
            raise ValueError(f"cube index {self.j} outside [1, {self.J}]^d")

    @property
    def d(self) -> int:
        return len(self.j)

    @property
    def lo(self) -> np.ndarray:
        return np.maximum((np.array(self.j) - 1) / self.J, self.domain.lo)

    @property
    def hi(self) -> np.ndarray:
        return np.minimum(np.array(self.j) / self.J, self.domain.hi)

    @property
    def box_is_empty(self) -> bool:
        return bool(np.any(self.lo > self.hi))

    @functools.cached_property
    def anchor(self) -> np.ndarray:
        """Center of the cube's box, or the feasible grid point nearest to it."""
        center = 0.5 * (self.lo + self.hi)
        if self.domain.in_feasible(center):
            return center
        pts = cube_grid(self, 10)
        return pts[np.argmin(np.sum((pts - center) ** 2, axis=1))].copy()

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.lo - tol)
            and np.all(x <= self.hi + tol)
            and self.domain.in_feasible(x, tol)
        )


def partition(domain: Domain, J: int, G: int = 10) -> list[Cube]:
    """All cubes of the J^d partition with at least one feasible grid point, lexicographic."""
    cubes = []
    for j in itertools.product(range(1, J + 1), repeat=domain.d):
        cube = Cube(j, J, domain)
        if cube.box_is_empty:
            continue
        try:
            cube_grid(cube, G)
        except EmptyCube:
            continue
        cubes.append(cube)
    return cubes


def cube_of(x, J: int, domain: Domain) -> Cube:
    idx = np.minimum(np.floor(np.asarray(x, dtype=float) * J).astype(int) + 1, J)
    return Cube(tuple(np.maximum(idx, 1)), J, domain)


@functools.lru_cache(maxsize=4096)
def _grid(cube: Cube, G: int) -> np.ndarray:
    if G < 2:
        raise ValueError("G must be at least 2")
    if cube.box_is_empty:
        raise EmptyCube(f"cube {cube.j} does not meet the domain box")
    axes = [np.linspace(lo, hi, G) for lo, hi in zip(cube.lo, cube.hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, cube.d)
    pts = pts[cube.domain.feasible_mask(pts)]
    if pts.shape[0] == 0:
        raise EmptyCube(f"cube {cube.j} has no feasible grid point at G={G}")
    pts.setflags(write=False)
    return pts


def cube_grid(cube: Cube, G: int = 10) -> np.ndarray:
    """Uniform G^d grid over the cube's box (C order), filtered to the feasible region."""
    return _grid(cube, G)


def feature_dim(k: int, d: int, cap: int = FEATURE_DIM_CAP) -> int:
    if k < 1 or d < 1:
        raise ValueError("k and d must be at least 1")
    nu = math.comb(k + d - 1, d)
    if nu > cap:
        raise FeatureDimOverflow(f"feature dimension {nu} exceeds cap {cap}")
    return nu


@functools.lru_cache(maxsize=None)
def exponent_table(k: int, d: int) -> np.ndarray:
    """Monomial exponents of total degree < k, graded then lexicographically descending.

    For d=3, k=3 the order is 1, x1, x2, x3, x1^2, x1x2, x1x3, x2^2, x2x3, x3^2.
    """
    rows = []
    for deg in range(k):
        block = [e for e in itertools.product(range(deg + 1), repeat=d) if sum(e) == deg]
        block.sort(reverse=True)
        rows.extend(block)
    table = np.array(rows, dtype=int).reshape(-1, d)
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class FeatureMap:
    k: int
    anchor: tuple[float, ...]
    lo: tuple[float, ...] | None = None
    hi: tuple[float, ...] | None = None
    exponents: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "anchor", tuple(float(a) for a in self.anchor))
        feature_dim(self.k, len(self.anchor))
        object.__setattr__(self, "exponents", exponent_table(self.k, len(self.anchor)))

    @classmethod
    def for_cube(cls, cube: Cube, k: int) -> "FeatureMap":
        return cls(k, tuple(cube.anchor), tuple(cube.lo), tuple(cube.hi))

    @property
    def d(self) -> int:
        return len(self.anchor)

    @property
    def nu(self) -> int:
        return self.exponents.shape[0]

    def outside(self, x, tol: float = 1e-12) -> bool:
        """True when ``x`` falls outside the cube this map was built for."""
        if self.lo is None:
            return False
        x = np.asarray(x, dtype=float)
        return bool(np.any(x < np.array(self.lo) - tol) or np.any(x > np.array(self.hi) + tol))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        """Features for one point (shape (d,)) or a batch (shape (m, d))."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        diff = np.atleast_2d(X) - np.array(self.anchor)
        out = np.ones((diff.shape[0], self.nu))
        for i in range(self.d):
            col = self.exponents[:, i]
            if col.any():
                out *= diff[:, i : i + 1] ** col[None, :]
        return out[0] if single else out


def feature_map(x, fm: FeatureMap) -> np.ndarray:
    return fm(np.asarray(x, dtype=float))


def poly_fit_error(
    f: Callable[[np.ndarray], np.ndarray], cube: Cube, k: int, G: int = 10
) -> float:
    """Smallest achievable max grid error of a degree-<k polynomial on the cube.

    Solved exactly as a linear program in (theta, t): minimize t subject to
    ``|f(x) - <theta, phi(x)>| <= t`` at every grid point. ``f`` takes an
    (m, d) array and returns m values.
    """
    pts = cube_grid(cube, G)
    Phi = FeatureMap.for_cube(cube, k)(pts)
    vals = np.asarray(f(pts), dtype=float)
    m, nu = Phi.shape
    theta, _ = _minimax_lp(Phi, vals)
    return float(np.max(np.abs(vals - Phi @ theta)))


def _minimax_lp(Phi: np.ndarray, vals: np.ndarray) -> tuple[np.ndarray, float]:
    m, nu = Phi.shape
    ones = np.ones((m, 1))
    A_ub = np.vstack([np.hstack([Phi, -ones]), np.hstack([-Phi, -ones])])
    b_ub = np.concatenate([vals, -vals])
    cost = np.zeros(nu + 1)
    cost[-1] = 1.0
    bounds = [(None, None)] * nu + [(0, None)]
    # presolve only adds overhead on these small dense problems
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs",
                  options={"presolve": False})
    if res.status != 0:
        raise RuntimeError(f"minimax fit failed: {res.message}")
    return res.x[:nu], float(res.x[-1])


def lstsq_fit_error(f, cube: Cube, k: int, G: int = 10) -> float:
    """Max grid error of the ordinary least-squares polynomial fit."""
    pts = cube_grid(cube, G)
    Phi = FeatureMap.for_cube(cube, k)(pts)
    vals = np.asarray(f(pts), dtype=float)
    theta, *_ = np.linalg.lstsq(Phi, vals, rcond=None)
    return float(np.max(np.abs(vals - Phi @ theta)))


def grid_points(lo: Sequence[float], hi: Sequence[float], G: int) -> np.ndarray:
    axes = [np.linspace(a, b, G) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
