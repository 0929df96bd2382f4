import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pairbandit.environments import SyntheticObjective
from pairbandit.geometry import Domain
from pairbandit.oracle import BudgetClock, ConsistencyParams, NoiseSpec, SyntheticOracle, counter_rng
from pairbandit.pgd import PgdConfig, estimate_gradient, fit_perturbation, prox_step, run_pgd


def oracle_for(f, T, noise=NoiseSpec(), seed=0):
    clock = BudgetClock(T)
    return SyntheticOracle(f, clock, counter_rng(seed), noise), clock


def test_beta_schedule():
    cfg = PgdConfig(sigma=1, gamma1=0.1, gamma2=0.1, M=2)
    assert cfg.eta == 0.5 and cfg.alpha == 0.5
    assert [cfg.beta(t) for t in range(4)] == [1, 2, 3, 4]
    assert PgdConfig(1, 0, 0, eta=1.0, alpha=1.0).beta(3) == 8


def test_config_validation():
    with pytest.raises(ValueError):
        PgdConfig(sigma=0, gamma1=0, gamma2=0, M=1)
    with pytest.raises(ValueError):
        PgdConfig(sigma=1, gamma1=0, gamma2=0)


def test_gradient_exact_for_quadratic_and_linear():
    x = np.array([0.3, 0.6])
    oracle, clock = oracle_for(lambda z: -float(z @ z), 100)
    g = estimate_gradient(x, 0.1, 3, 0.5, oracle)
    np.testing.assert_allclose(g, -2 * x + 0.5 * x, atol=1e-12)
    assert clock.used == 2 * 2 * 3
    c = np.array([0.7, -0.2])
    oracle, _ = oracle_for(lambda z: float(c @ z), 100)
    np.testing.assert_allclose(estimate_gradient(x, 0.05, 1, 1.0, oracle), c + x, atol=1e-12)


def test_noisy_gradient_error_shrinks():
    d, a = 2, 0.1
    noise = NoiseSpec("uniform", a)
    f = SyntheticObjective("f4", d, noise)
    x = np.array([0.6, 0.4])
    truth = f.gradient(x)
    gp = ConsistencyParams.from_bounded_noise(a)
    errs = []
    for beta in [100, 1000, 10000]:
        cfg = PgdConfig(1.0, gp.gamma1, gp.gamma2, M=1.0)
        h = cfg.h(beta, d, 10**5)
        e = []
        for r in range(40):
            oracle, _ = oracle_for(f, 2 * d * beta, noise, seed=r)
            e.append(np.linalg.norm(estimate_gradient(x, h, beta, 0.0, oracle) - truth))
        err = float(np.mean(e))
        bound = math.sqrt(d) * (1.0 * h + math.sqrt((gp.gamma1 + gp.gamma2 * math.log(20)) / beta) / h)
        assert err <= 3 * bound
        errs.append(err)
    assert errs[0] > errs[1] > errs[2]


def test_fit_perturbation():
    dom = Domain.unit(2)
    x = np.array([0.5, 0.5])
    assert fit_perturbation(x, 0.1, dom)[2] == "none"
    base, h, kind = fit_perturbation(np.array([0.07, 0.5]), 0.1, dom)
    assert kind == "shrunk" and h == pytest.approx(0.07)
    base, h, kind = fit_perturbation(np.array([0.01, 0.5]), 0.1, dom)
    assert kind == "shifted" and h == 0.05
    assert np.all(base - h >= 0) and np.all(base + h <= 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 2), min_size=2, max_size=2),
       st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.floats(0.1, 3), st.floats(0.1, 3))
def test_prox_step_beats_grid(x, g, sigma, alpha):
    dom = Domain.unit(2, 0.05)
    x, g = np.clip(np.array(x), 0, 1), np.array(g)
    u = prox_step(x, g, sigma, alpha, dom)
    obj = lambda v: -g @ v + sigma * (v @ v) / 2 + ((v - x) @ (v - x)) / (2 * alpha)
    grid = np.linspace(0.05, 0.95, 91)
    best = min(obj(np.array([a, b])) for a in grid for b in grid)
    assert obj(u) <= best + 1e-6
    assert np.all(u >= 0.05 - 1e-12) and np.all(u <= 0.95 + 1e-12)


def test_zero_noise_f4_converges_geometrically():
    f = SyntheticObjective("f4", 2)
    cfg = PgdConfig(sigma=1.0, gamma1=0.01, gamma2=0.005, M=1.0)
    oracle, clock = oracle_for(f, 4000)
    trace = run_pgd(Domain.unit(2, 0.05), cfg, oracle, x0=np.array([0.9, 0.8]))
    dist = [np.linalg.norm(x - 0.25) for x in trace.iterates]
    assert clock.used == 4000
    assert len(trace.epochs) >= 8 and dist[-1] <= dist[0] * 0.51 ** len(trace.epochs)
    assert all(b <= 0.51 * a + 1e-9 for a, b in zip(dist[:6], dist[1:7]))


@pytest.mark.parametrize("seed", range(20))
def test_contraction_on_random_quadratics(seed):
    rng = np.random.default_rng(seed)
    d, M = 3, 4.0
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    H = Q @ np.diag(rng.uniform(1.0, M, d)) @ Q.T
    c = rng.uniform(0.3, 0.7, d)
    f = lambda z: -0.5 * float((z - c) @ H @ (z - c))
    cfg = PgdConfig(sigma=1.0, gamma1=0.01, gamma2=0.005, M=M)
    oracle, _ = oracle_for(f, 3000)
    trace = run_pgd(Domain.unit(d, 0.05), cfg, oracle)
    dist = [np.linalg.norm(x - c) for x in trace.iterates]
    rho = M / (M + 1.0)
    assert all(b <= rho * a + 1e-9 for a, b in zip(dist, dist[1:]))


@pytest.mark.parametrize("T", [1, 5, 37, 1000])
def test_budget_and_feasibility(T):
    f = SyntheticObjective("f4", 2, NoiseSpec("uniform", 0.1))
    dom = Domain.unit(2, 0.05)
    cfg = PgdConfig(1.0, 0.01, 0.005, eta=1.0, alpha=1.0)
    oracle, clock = oracle_for(f, T, f.noise)
    trace = run_pgd(dom, cfg, oracle)
    assert clock.used == T
    if T == 1:
        assert not trace.epochs and trace.committed == 1
        np.testing.assert_allclose(trace.x_final, [0.5, 0.5])
    for e in trace.epochs:
        assert np.all(e.base - e.h >= 0) and np.all(e.base + e.h <= 1)
        assert np.all(e.x >= 0.05 - 1e-12) and np.all(e.x <= 0.95 + 1e-12)
