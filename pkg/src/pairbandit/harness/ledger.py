"""Regret accounting.

Two metric modes:

* ``pair``: each event of ``n`` periods playing ``(x, x')`` costs
  ``n (2 f* - f(x) - f(x'))``; the penalty ``T psi(avg action)`` is added once
  when the run is finalized. Relative regret divides by ``2 T f*``.
* ``action``: every period reports the expected reward of the single action
  actually taken; regret is ``sum(R* - R_t)`` and relative regret divides by
  ``T R*``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class PenaltyFunction:
    """Knapsack penalty on the time-averaged action.

    ``max_affine`` is ``scale * max(0, max_j (A x)_j - cap_j)`` with
    ``scale = p_bar * n_products / A_min``; it vanishes on ``{A x <= cap}``.
    """

    kind: str = "zero"
    A: tuple[tuple[float, ...], ...] = ()
    cap: tuple[float, ...] = ()
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "max_affine"):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.kind == "max_affine":
            if len(self.A) != len(self.cap) or not self.A:
                raise ValueError("A and cap must have the same nonzero number of rows")
            if self.scale < 0:
                raise ValueError("penalty scale must be nonnegative")

    @classmethod
    def max_affine(cls, A, cap, p_bar: float, n_products: int, A_min: float) -> "PenaltyFunction":
        if A_min <= 0:
            raise ValueError("A_min must be positive")
        rows = tuple(tuple(float(v) for v in r) for r in A)
        return cls("max_affine", rows, tuple(float(c) for c in cap), p_bar * n_products / A_min)

    def __call__(self, xbar) -> float:
        if self.kind == "zero":
            return 0.0
        excess = np.asarray(self.A) @ np.asarray(xbar, dtype=float) - np.asarray(self.cap)
        return self.scale * max(0.0, float(np.max(excess)))


@dataclass
class RegretLedger:
    f_star: float
    mode: str = "pair"
    f: Callable | None = None
    penalty: PenaltyFunction = field(default_factory=PenaltyFunction)
    periods: int = 0
    total: float = 0.0
    action_sum: np.ndarray | None = None
    events: list = field(default_factory=list, repr=False)
    penalty_term: float | None = None

    def __post_init__(self):
        if self.mode not in ("pair", "action"):
            raise ValueError("mode must be 'pair' or 'action'")
        if self.mode == "pair" and self.f is None:
            raise ValueError("pair mode needs the objective f")

    def record(self, n: int, x, x2, rewards: Sequence[float] | None = None) -> None:
        """Clock hook: account for ``n`` periods spent on ``(x, x2)``."""
        if self.penalty_term is not None:
            raise RuntimeError("ledger already finalized")
        x = np.asarray(x, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.mode == "pair":
            inc = n * (2 * self.f_star - float(self.f(x)) - float(self.f(x2)))
            self.events.append((n, x, x2))
        else:
            if rewards is None:
                raise ValueError("action mode needs per-period rewards")
            r = np.asarray(rewards, dtype=float)
            if r.shape != (n,):
                raise ValueError("need exactly one reward per period")
            inc = float(np.sum(self.f_star - r))
            self.events.append((n, x, x2, r))
        self.total += inc
        s = n * (x + x2)
        self.action_sum = s if self.action_sum is None else self.action_sum + s
        self.periods += n

    __call__ = record

    def finalize(self, T: int | None = None) -> float:
        """Add ``T psi(average action)`` once; returns the cumulative regret."""
        T = self.periods if T is None else T
        if self.penalty_term is None:
            if self.action_sum is None or T == 0:
                self.penalty_term = 0.0
            else:
                self.penalty_term = T * self.penalty(self.action_sum / (2 * T))
        return self.cumulative

    @property
    def cumulative(self) -> float:
        return self.total + (self.penalty_term or 0.0)

    def relative_regret(self, T: int | None = None) -> float:
        """Percentage of the clairvoyant total (2T f* for pairs, T R* for single actions)."""
        T = self.periods if T is None else T
        denom = (2 if self.mode == "pair" else 1) * T * self.f_star
        if denom == 0:
            raise ZeroDivisionError("relative regret undefined for f* = 0 or T = 0")
        return 100.0 * self.finalize(T) / denom

    def replay(self) -> float:
        """Recompute the cumulative regret from the stored events alone."""
        other = RegretLedger(self.f_star, self.mode, self.f, self.penalty)
        for ev in self.events:
            other.record(*ev)
        return other.finalize(self.periods)
