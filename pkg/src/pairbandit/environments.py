"""Test objectives and the joint pricing/inventory environment with censored demand.

The synthetic objectives are two compactly supported Wendland radial
functions and two concave functions. The inventory environment simulates a
repeated newsvendor with price-dependent demand ``lambda(p) + eps`` where
only ``min(demand, stock)`` is observed; true profit goes to a hidden ledger
that policies never see.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.optimize import minimize_scalar
from scipy.special import ndtr, ndtri

from pairbandit.oracle import BudgetClock, NoiseSpec, PairwiseOracle

SYNTHETIC_IDS = ("f1", "f2", "f3", "f4")


def _radius(X: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(X * X, axis=-1))


def wendland_c2(X):
    r = _radius(np.asarray(X, dtype=float))
    return np.where(r <= 1.0, (1 - np.minimum(r, 1.0)) ** 4 * (4 * r + 1), 0.0)


def wendland_c4(X):
    r = _radius(np.asarray(X, dtype=float))
    return np.where(
        r <= 1.0, (1 - np.minimum(r, 1.0)) ** 6 * (35 * r * r + 18 * r + 3), 0.0
    )


def linear_descent(X):
    X = np.asarray(X, dtype=float)
    return -0.5 * np.sum(X, axis=-1) + 1.0


def centered_quadratic(X):
    X = np.asarray(X, dtype=float)
    return -0.5 * np.sum((X - 0.25) ** 2, axis=-1) + 1.0


_SYNTHETIC = {
    "f1": wendland_c2,
    "f2": wendland_c4,
    "f3": linear_descent,
    "f4": centered_quadratic,
}


@dataclass(frozen=True)
class SyntheticObjective:
    id: str
    d: int
    noise: NoiseSpec = NoiseSpec()

    def __post_init__(self):
        if self.id not in _SYNTHETIC:
            raise ValueError(f"unknown objective {self.id!r}; expected one of {SYNTHETIC_IDS}")

    def __call__(self, x) -> float | np.ndarray:
        out = _SYNTHETIC[self.id](x)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def maximizer(self) -> np.ndarray:
        """Maximizer over [0, 1]^d."""
        return np.full(self.d, 0.25) if self.id == "f4" else np.zeros(self.d)

    @property
    def f_star(self) -> float:
        return float(self(self.maximizer))

    @property
    def gradient(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.id == "f3":
            return lambda x: np.full(np.shape(x), -0.5)
        if self.id == "f4":
            return lambda x: -(np.asarray(x, dtype=float) - 0.25)
        raise ValueError(f"no closed-form gradient for {self.id}")


def eval_synthetic(obj: SyntheticObjective, x) -> float:
    return float(obj(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# Inventory


def _exponential(p):
    return np.exp(3 - 0.04 * np.asarray(p, dtype=float))


def _logit(p):
    e = np.exp(3 - 0.1 * np.asarray(p, dtype=float))
    return e / (1 + e)


def _bimodal(p):
    p = np.asarray(p, dtype=float)
    return 5 * (2 - ndtr((p - 4.5) / 0.81) - ndtr((p - 8.5) / 1.44))


DEMAND_CURVES = {
    "exponential": (_exponential, (20.0, 30.0)),
    "logit": (_logit, (20.0, 30.0)),
    "bimodal": (_bimodal, (1.0, 10.0)),
}

NORMAL_EFFECTIVE_SDS = 6.0


@dataclass(frozen=True)
class InventoryModel:
    """Single-product pricing/newsvendor model with lost, unobserved excess demand."""

    curve: str
    noise: NoiseSpec
    h: float
    b: float
    price_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.curve not in DEMAND_CURVES:
            raise ValueError(f"unknown demand curve {self.curve!r}")
        if self.h <= 0 or self.b <= 0:
            raise ValueError("h and b must be positive")
        if self.noise.kind not in ("none", "uniform", "normal"):
            raise ValueError("noise must be none, uniform or normal")
        if self.price_range is None:
            object.__setattr__(self, "price_range", DEMAND_CURVES[self.curve][1])
        else:
            object.__setattr__(self, "price_range", tuple(float(v) for v in self.price_range))

    def demand_mean(self, p):
        return DEMAND_CURVES[self.curve][0](p)

    @property
    def noise_bound(self) -> float:
        """Known bound on |eps|: exact for uniform, 6 sd for normal (an approximation)."""
        if self.noise.is_zero:
            return 0.0
        if self.noise.kind == "uniform":
            return self.noise.scale
        return NORMAL_EFFECTIVE_SDS * self.noise.scale

    @property
    def demand_cap(self) -> float:
        """A-priori upper bound on demand over the price range, used for first-period stock."""
        lo, hi = self.price_range
        grid = np.linspace(lo, hi, 1001)
        return float(np.max(self.demand_mean(grid))) + self.noise_bound

    def price(self, x) -> float:
        lo, hi = self.price_range
        return lo + float(np.asarray(x, dtype=float).ravel()[0]) * (hi - lo)

    def unit(self, p: float) -> float:
        lo, hi = self.price_range
        return (p - lo) / (hi - lo)

    def fractile(self, p: float) -> float:
        return (p + self.b) / (p + self.b + self.h)

    # expected profit R(p, y) = p E[min(D,y)] - b E[(D-y)+] - h E[(y-D)+]
    # with E[min(D,y)] = y - E[(y-D)+]; everything reduces to the loss
    # functions E[(y-D)+] and E[(D-y)+] = E[(y-D)+] - (y - lambda).

    def _expected_shortfall(self, z):
        """E[(z - eps)^+] for the noise distribution."""
        z = np.asarray(z, dtype=float)
        if self.noise.is_zero:
            return np.maximum(z, 0.0)
        if self.noise.kind == "uniform":
            a = self.noise.scale
            zc = np.clip(z, -a, a)
            inside = (zc + a) ** 2 / (4 * a)
            return np.where(z >= a, z, inside)
        s = self.noise.scale
        u = z / s
        return z * ndtr(u) + s * np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)

    def expected_profit(self, p, y):
        p = np.asarray(p, dtype=float)
        y = np.asarray(y, dtype=float)
        lam = self.demand_mean(p)
        over = self._expected_shortfall(y - lam)  # E[(y - D)^+]
        under = over - (y - lam)  # E[(D - y)^+]
        sales = y - over
        return p * sales - self.b * under - self.h * over

    def noise_quantile(self, q: float) -> float:
        if self.noise.is_zero:
            return 0.0
        if self.noise.kind == "uniform":
            a = self.noise.scale
            return -a + 2 * a * q
        return self.noise.scale * float(ndtri(q))

    def optimal_stock(self, p):
        """Newsvendor stock level y*(p) = lambda(p) + F^{-1}((p+b)/(p+b+h))."""
        p = np.asarray(p, dtype=float)
        q = (p + self.b) / (p + self.b + self.h)
        return self.demand_mean(p) + np.vectorize(self.noise_quantile)(q)

    def G(self, p):
        return self.expected_profit(p, self.optimal_stock(p))

    def G_unit(self, x):
        """G as a function of the normalized price in [0, 1].

        A trailing axis of length one is treated as the point dimension.
        """
        lo, hi = self.price_range
        X = np.asarray(x, dtype=float)
        if X.ndim and X.shape[-1] == 1:
            X = X[..., 0]
        out = self.G(lo + X * (hi - lo))
        return float(out) if np.ndim(out) == 0 else out

    def expected_profit_quadrature(self, p: float, y: float) -> float:
        """Independent numerical-integration check of :meth:`expected_profit`."""
        lam = float(self.demand_mean(p))

        def r(eps):
            dmd = lam + eps
            return p * min(dmd, y) - self.b * max(0.0, dmd - y) - self.h * max(0.0, y - dmd)

        if self.noise.is_zero:
            return r(0.0)
        if self.noise.kind == "uniform":
            a = self.noise.scale
            pts = [v for v in (y - lam,) if -a < v < a]
            val, _ = integrate.quad(r, -a, a, points=pts or None, epsabs=1e-11, epsrel=1e-11)
            return val / (2 * a)
        s = self.noise.scale
        dens = lambda e: r(e) * math.exp(-0.5 * (e / s) ** 2) / (s * math.sqrt(2 * math.pi))
        kink = y - lam
        left, _ = integrate.quad(dens, -np.inf, kink, epsabs=1e-11, epsrel=1e-11)
        right, _ = integrate.quad(dens, kink, np.inf, epsabs=1e-11, epsrel=1e-11)
        return left + right


@dataclass
class InventoryObservation:
    sale: np.ndarray
    stockout: np.ndarray


def inventory_step(model: InventoryModel, p: float, y, rng: np.random.Generator,
                   hidden: list | None = None) -> InventoryObservation:
    """Simulate periods at price ``p`` with stock levels ``y`` (scalar or array).

    Only censored quantities are returned; realized profits are appended to
    ``hidden`` when given.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    demand = model.demand_mean(p) + model.noise.draw(rng, y.shape[0])
    sale = np.minimum(demand, y)
    if hidden is not None:
        profit = p * sale - model.b * np.maximum(0, demand - y) - model.h * np.maximum(0, y - demand)
        hidden.extend(profit.tolist())
    return InventoryObservation(sale, demand >= y)


@dataclass
class ClairvoyantSolution:
    p_star: float
    y_star: float
    R_star: float
    model: InventoryModel = field(repr=False)

    def G(self, p):
        return self.model.G(p)

    def y_of(self, p):
        return self.model.optimal_stock(p)


def clairvoyant(model: InventoryModel, resolution: float = 1e-3) -> ClairvoyantSolution:
    """Maximize G(p) by a grid search over the price range, then golden-section refinement."""
    lo, hi = model.price_range
    m = int(round(1.0 / resolution)) + 1
    grid = np.linspace(lo, hi, m)
    vals = model.G(grid)
    i = int(np.argmax(vals))
    a, c = grid[max(i - 1, 0)], grid[min(i + 1, m - 1)]
    p_star, g_star = float(grid[i]), float(vals[i])
    if c > a:
        res = minimize_scalar(
            lambda p: -float(model.G(p)), bracket=None, bounds=(a, c), method="bounded",
            options={"xatol": 1e-10},
        )
        if -res.fun > g_star:
            p_star, g_star = float(res.x), float(-res.fun)
    return ClairvoyantSolution(p_star, float(model.optimal_stock(p_star)), g_star, model)


class InventoryOracle(PairwiseOracle):
    """Comparison oracle for G(p') - G(p) built from inventory-inflation exploration.

    A call splits its periods evenly between the two prices (a single period
    goes to the less explored one). Stock is raised to the running mean of
    observed sales plus the noise bound, so with bounded noise demand is
    (almost always) observed in full. The estimate uses the whole history:
    each price's demand mean comes from all its sales, and centered residuals
    are pooled across prices. Each plug-in newsvendor profit is maximized at
    the empirical critical fractile. Every period is reported to the clock
    with its expected profit.

    The decision variable ``x`` is the normalized price in [0, 1].
    """

    def __init__(self, model: InventoryModel, clock: BudgetClock, rng: np.random.Generator):
        super().__init__(clock)
        self.model = model
        self.rng = rng
        self.hidden_profit: list[float] = []
        self._sales: dict[float, list[float]] = {}

    def _realize(self, p: float, demand: np.ndarray, stock: np.ndarray, kind: str) -> np.ndarray:
        model = self.model
        sale = np.minimum(demand, stock)
        profit = (
            p * sale
            - model.b * np.maximum(0, demand - stock)
            - model.h * np.maximum(0, stock - demand)
        )
        self.hidden_profit.extend(profit.tolist())
        x = np.array([model.unit(p)])
        self.clock.consume(stock.shape[0], x, x, rewards=model.expected_profit(p, stock), kind=kind)
        return sale

    def _explore(self, p: float, n: int) -> np.ndarray:
        """Play price ``p`` for ``n`` periods with inflated stock; return observed sales."""
        model = self.model
        bound = model.noise_bound
        history = self._sales.setdefault(p, [])
        demand = model.demand_mean(p) + model.noise.draw(self.rng, n)
        # optimistic pass assumes no censoring; redo sequentially from the first stockout
        prior_sum = sum(history) + np.concatenate(([0.0], np.cumsum(demand[:-1])))
        seen = len(history) + np.arange(n)
        stock = np.where(seen > 0, prior_sum / np.maximum(seen, 1) + bound, model.demand_cap)
        censored = np.nonzero(demand > stock)[0]
        if censored.size:
            t0 = int(censored[0])
            total = float(prior_sum[t0] + min(demand[t0], stock[t0]))
            for t in range(t0 + 1, n):
                stock[t] = total / (len(history) + t) + bound
                total += min(demand[t], stock[t])
        stock = np.maximum(stock, 0.0)
        sale = self._realize(p, demand, stock, "query")
        history.extend(sale.tolist())
        return sale

    def residual_pool(self) -> np.ndarray:
        parts = [np.asarray(v) - np.mean(v) for v in self._sales.values() if len(v) >= 2]
        if not parts:
            return np.zeros(1)
        pooled = np.concatenate(parts)
        # centering each price's sample shrinks the spread by sqrt((m-1)/m)
        dof = sum(len(v) - 1 for v in self._sales.values() if len(v) >= 2)
        return pooled * math.sqrt(pooled.size / dof)

    def _plug_in_value(self, p: float, lam_hat: float, residuals: np.ndarray) -> float:
        model = self.model
        y = lam_hat + float(np.quantile(residuals, model.fractile(p), method="inverted_cdf"))
        d = lam_hat + residuals
        r = p * np.minimum(d, y) - model.b * np.maximum(0, d - y) - model.h * np.maximum(0, y - d)
        return float(r.mean())

    def _estimate(self, n, x, x2):
        p, p2 = self.model.price(x), self.model.price(x2)
        if n == 1:
            # a single period goes to whichever price has fewer observations
            fewer = p if len(self._sales.get(p, [])) < len(self._sales.get(p2, [])) else p2
            self._explore(fewer, 1)
        else:
            self._explore(p, n // 2)
            self._explore(p2, n - n // 2)
        if not self._sales.get(p) or not self._sales.get(p2):
            return 0.0
        # every observation so far feeds the estimate: demand means per price,
        # residuals pooled across prices (the noise is additive and price-free)
        pooled = self.residual_pool()
        lam1 = float(np.mean(self._sales[p]))
        lam2 = float(np.mean(self._sales[p2]))
        return self._plug_in_value(p2, lam2, pooled) - self._plug_in_value(p, lam1, pooled)

    def commit(self, n: int, x, x2) -> int:
        """Alternate the two prices, stocking each at its plug-in newsvendor level."""
        n = min(int(n), self.clock.remaining)
        if n <= 0:
            return 0
        p, p2 = self.model.price(x), self.model.price(x2)
        if p == p2:
            self._commit_price(p, n)
        else:
            self._commit_price(p, n - n // 2)
            self._commit_price(p2, n // 2)
        return n

    def _commit_price(self, p: float, m: int) -> None:
        history = self._sales.get(p, [])
        warm = min(m, max(0, 2 - len(history)))
        if warm:
            self._explore(p, warm)
            history = self._sales[p]
        rest = m - warm
        if rest <= 0:
            return
        model = self.model
        lam_hat = float(np.mean(history))
        y = lam_hat + float(np.quantile(self.residual_pool(), model.fractile(p), method="inverted_cdf"))
        demand = model.demand_mean(p) + model.noise.draw(self.rng, rest)
        self._realize(p, demand, np.full(rest, max(y, 0.0)), "commit")


def inventory_comparison_oracle(model: InventoryModel, n: int, p: float, p2: float,
                                rng: np.random.Generator | None = None):
    """One-off comparison on a fresh clock; prices are in the model's own units."""
    if n < 8:
        raise ValueError("a stand-alone inventory comparison needs n >= 8")
    clock = BudgetClock(n)
    oracle = InventoryOracle(model, clock, rng if rng is not None else np.random.default_rng(0))
    return oracle.invoke(n, [model.unit(p)], [model.unit(p2)])
