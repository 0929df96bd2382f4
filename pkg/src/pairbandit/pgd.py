"""Proximal gradient ascent with batched finite-difference gradients.

Intended for strongly concave, twice smooth objectives. Epoch ``tau`` spends
``2 d beta_tau`` periods on central differences of step ``h_tau`` and then
takes one closed-form proximal step projected onto the interior region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pairbandit.geometry import Domain
from pairbandit.numerics import project_box_halfspaces
from pairbandit.oracle import PairwiseOracle


@dataclass(frozen=True)
class PgdConfig:
    sigma: float
    gamma1: float
    gamma2: float
    M: float | None = None
    eta: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if (self.eta is None or self.alpha is None) and self.M is None:
            raise ValueError("M is needed to default eta and alpha")
        if self.M is not None and self.M <= 0:
            raise ValueError("M must be positive")
        if self.eta is None:
            object.__setattr__(self, "eta", self.sigma / self.M)
        if self.alpha is None:
            object.__setattr__(self, "alpha", 1.0 / self.M)
        if self.eta <= 0 or self.alpha <= 0:
            raise ValueError("eta and alpha must be positive")

    def beta(self, tau: int) -> int:
        # guard against 1.5**2 style float noise just above an integer
        v = (1.0 + self.eta) ** tau
        r = round(v)
        return int(r) if abs(v - r) < 1e-9 * max(1.0, v) else math.ceil(v)

    def h(self, beta: int, d: int, T: int) -> float:
        return ((self.gamma1 + 2 * self.gamma2 * math.log(max(T, 1))) / (beta * d)) ** 0.25


@dataclass
class Epoch:
    tau: int
    beta: int
    h: float
    x: np.ndarray
    base: np.ndarray
    g: np.ndarray
    clipped: str = "none"  # none | shrunk | shifted

    def to_json(self) -> dict:
        return {
            "tau": self.tau,
            "beta": self.beta,
            "h": self.h,
            "x": self.x.tolist(),
            "base": self.base.tolist(),
            "g": self.g.tolist(),
            "clipped": self.clipped,
        }


@dataclass
class PgdTrace:
    x0: np.ndarray
    epochs: list[Epoch] = field(default_factory=list)
    x_final: np.ndarray | None = None
    committed: int = 0

    @property
    def iterates(self) -> list[np.ndarray]:
        xs = [e.x for e in self.epochs] or [self.x0]
        return xs + ([self.x_final] if self.x_final is not None and self.epochs else [])

    def to_json(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "epochs": [e.to_json() for e in self.epochs],
            "x_final": None if self.x_final is None else self.x_final.tolist(),
            "committed": self.committed,
        }


def project_interior(domain: Domain, u) -> np.ndarray:
    """Euclidean projection onto the interior box intersected with the halfspaces."""
    return project_box_halfspaces(u, domain.interior_lo, domain.interior_hi, domain.halfspaces)


def fit_perturbation(x: np.ndarray, h: float, domain: Domain) -> tuple[np.ndarray, float, str]:
    """Choose a probe base and step so that ``base +- h e_j`` stays inside the domain box.

    Shrinks ``h`` down to no less than ``h/2``; if that is not enough the
    base is projected onto the box shrunk by ``h/2``.
    """
    lo, hi = domain.lo, domain.hi
    h = min(h, float(np.min(hi - lo)) / 2)
    room = float(np.min(np.minimum(x - lo, hi - x)))
    if room >= h:
        return x, h, "none"
    if room >= h / 2:
        return x, room, "shrunk"
    h = h / 2
    return np.clip(x, lo + h, hi - h), h, "shifted"


def estimate_gradient(x, h: float, beta: int, sigma: float, oracle: PairwiseOracle) -> np.ndarray:
    """Central-difference estimate of grad f(x) plus ``sigma * x`` from ``2d`` oracle calls."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        y = oracle.invoke(beta, x, x + e).y
        y2 = oracle.invoke(beta, x, x - e).y
        g[j] = (y - y2) / (2 * h) + sigma * x[j]
    return g


def prox_step(x, g, sigma: float, alpha: float, domain: Domain) -> np.ndarray:
    """Minimize ``-<g,u> + sigma|u|^2/2 + |u-x|^2/(2 alpha)`` over the interior region.

    The objective is a scaled squared distance to the unconstrained minimizer,
    so projecting that point is exact.
    """
    if sigma <= 0 or alpha <= 0:
        raise ValueError("sigma and alpha must be positive")
    x = np.asarray(x, dtype=float)
    u = (np.asarray(g, dtype=float) + x / alpha) / (sigma + 1 / alpha)
    return project_interior(domain, u)


def run_pgd(domain: Domain, cfg: PgdConfig, oracle: PairwiseOracle, T: int | None = None,
            x0=None) -> PgdTrace:
    """Run epochs until fewer than ``2 d beta_tau`` periods remain, then commit."""
    clock = oracle.clock
    if T is None:
        T = clock.remaining
    if T != clock.remaining:
        raise ValueError("T must equal the clock's remaining budget")
    d = domain.d
    x = project_interior(domain, domain.center if x0 is None else x0)
    trace = PgdTrace(x.copy())
    tau = 0
    while True:
        beta = cfg.beta(tau)
        if clock.remaining < 2 * d * beta:
            break
        h = cfg.h(beta, d, clock.T)
        base, h, clipped = fit_perturbation(x, h, domain)
        g = estimate_gradient(base, h, beta, cfg.sigma, oracle)
        trace.epochs.append(Epoch(tau, beta, h, x.copy(), base.copy(), g, clipped))
        x = prox_step(x, g, cfg.sigma, cfg.alpha, domain)
        tau += 1
    trace.x_final = x.copy()
    trace.committed = oracle.commit(clock.remaining, x, x)
    return trace
