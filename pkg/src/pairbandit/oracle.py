"""Pairwise comparison oracles and the global period budget.

An oracle call ``invoke(n, x, x2)`` spends ``n`` periods playing the pair
``(x, x2)`` and returns a noisy estimate of ``f(x2) - f(x)``. Every period
spent, with or without feedback, goes through a :class:`BudgetClock` so the
regret ledger sees the exact action sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from pairbandit.errors import BudgetExhausted


class ConsumptionHook(Protocol):
    def __call__(self, n: int, x: np.ndarray, x2: np.ndarray, rewards=None) -> None: ...


@dataclass(frozen=True)
class ConsistencyParams:
    """Error envelope ``sqrt((gamma1 + gamma2 ln(1/delta)) / n)`` of an oracle."""

    gamma1: float
    gamma2: float

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("gamma1 and gamma2 must be nonnegative")

    @classmethod
    def from_bounded_noise(cls, a: float) -> "ConsistencyParams":
        """Hoeffding constants for differences of averages of noise bounded by ``a``."""
        return cls(2 * a * a * math.log(2), 2 * a * a)

    def envelope(self, n: int, delta: float) -> float:
        return math.sqrt((self.gamma1 + self.gamma2 * math.log(1 / delta)) / n)


@dataclass(frozen=True)
class OracleReply:
    y: float
    n: int
    x: np.ndarray
    x2: np.ndarray


class BudgetClock:
    """Ledger of the T-period horizon. ``used`` never exceeds ``T``."""

    def __init__(self, T: int, hook: ConsumptionHook | None = None):
        if T < 0:
            raise ValueError("T must be nonnegative")
        self.T = int(T)
        self.used = 0
        self.hook = hook
        self.events: list[tuple[str, int]] = []

    @property
    def remaining(self) -> int:
        return self.T - self.used

    def consume(self, n: int, x, x2, rewards=None, kind: str = "query") -> None:
        n = int(n)
        if n < 0:
            raise ValueError("n must be nonnegative")
        if n > self.remaining:
            raise BudgetExhausted(n, self.remaining)
        if n == 0:
            return
        self.used += n
        self.events.append((kind, n))
        if self.hook is not None:
            self.hook(n, np.asarray(x, dtype=float), np.asarray(x2, dtype=float), rewards)


def commit(clock: BudgetClock, n: int, x, x2) -> int:
    """Play ``(x, x2)`` for ``min(n, remaining)`` periods without feedback."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    n = min(int(n), clock.remaining)
    clock.consume(n, x, x2, kind="commit")
    return n


@dataclass(frozen=True)
class NoiseSpec:
    """Additive observation noise: ``none``, ``uniform`` on [-scale, scale], or ``normal`` with sd ``scale``."""

    kind: str = "none"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "uniform", "normal"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.scale < 0:
            raise ValueError("noise scale must be nonnegative")

    @property
    def is_zero(self) -> bool:
        return self.kind == "none" or self.scale == 0.0

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(-self.scale, self.scale, size)
        if self.kind == "normal":
            return rng.normal(0.0, self.scale, size)
        return np.zeros(size)


class PairwiseOracle:
    """Base class: subclasses implement :meth:`_estimate`."""

    def __init__(self, clock: BudgetClock):
        self.clock = clock

    def invoke(self, n: int, x, x2) -> OracleReply:
        n = int(n)
        if n < 1:
            raise ValueError("an oracle call needs at least one period")
        if n > self.clock.remaining:
            raise BudgetExhausted(n, self.clock.remaining)
        x = np.asarray(x, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        y = self._estimate(n, x, x2)
        return OracleReply(float(y), n, x, x2)

    def commit(self, n: int, x, x2) -> int:
        return commit(self.clock, n, x, x2)

    def _estimate(self, n: int, x: np.ndarray, x2: np.ndarray) -> float:
        raise NotImplementedError


class SyntheticOracle(PairwiseOracle):
    """Difference of sample averages of noisy function values.

    Each call draws ``2n`` noise variates: the first ``n`` perturb ``f(x)``,
    the next ``n`` perturb ``f(x2)``.
    """

    def __init__(
        self,
        f: Callable[[np.ndarray], float],
        clock: BudgetClock,
        rng: np.random.Generator | None = None,
        noise: NoiseSpec = NoiseSpec(),
    ):
        super().__init__(clock)
        self.f = f
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.noise = noise

    def _estimate(self, n, x, x2):
        delta = float(self.f(x2)) - float(self.f(x))
        self.clock.consume(n, x, x2)
        if self.noise.is_zero:
            return delta
        eps = self.noise.draw(self.rng, 2 * n)
        return delta + (eps[n:].mean() - eps[:n].mean())


def counter_rng(*key: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by a tuple of nonnegative integers."""
    seq = np.random.SeedSequence([int(k) for k in key])
    return np.random.Generator(np.random.Philox(seq))
