import numpy as np
import pytest

from pairbandit.environments import SyntheticObjective
from pairbandit.geometry import Domain
from pairbandit.oracle import BudgetClock, NoiseSpec, SyntheticOracle, counter_rng
from pairbandit.tournament import (
    RoundRecord,
    TournamentConfig,
    default_c1,
    default_c2,
    run_tournament,
    single_elim,
    threshold_eliminate,
)


class TableOracle:
    """Answers with exact differences of a lookup on the first coordinate."""

    def __init__(self, values, T=10**6):
        self.values = values
        self.clock = BudgetClock(T)

    def invoke(self, n, x, x2):
        from pairbandit.oracle import OracleReply

        self.clock.consume(n, x, x2)
        y = self.values[float(x2[0])] - self.values[float(x[0])]
        return OracleReply(y, n, np.asarray(x), np.asarray(x2))


def champs(vals):
    return [((i,), np.array([float(i)])) for i in range(1, len(vals) + 1)]


def test_single_elim_bracket():
    vals = {1.0: 0.1, 2.0: 0.5, 3.0: 0.3, 4.0: 0.2, 5.0: 0.05}
    oracle = TableOracle(vals)
    rec = RoundRecord(1, 0.5, 3, [])
    assert single_elim(champs(vals), 3, oracle, rec) == (2,)
    assert rec.bracket_rounds == 3
    assert len(rec.matches) == 4  # n - 1 matches
    assert oracle.clock.used == 12


def test_single_elim_tie_goes_to_second():
    oracle = TableOracle({1.0: 0.0, 2.0: 0.0})
    assert single_elim(champs([0, 0]), 1, oracle) == (2,)


def test_threshold_eliminate():
    vals = {1.0: 0.0, 2.0: 1.0, 3.0: 0.95}
    oracle = TableOracle(vals)
    kept = threshold_eliminate((2,), champs(vals), 1, 0.1, 0.0, oracle)
    assert kept == [(2,), (3,)]
    assert oracle.clock.used == 2


def test_constants():
    assert default_c1("theoretical", 0.1, 0.2, 100) == pytest.approx(0.1 + 0.4 * np.log(100))
    assert default_c1("practical", 0.1, 0.2, 100) == pytest.approx(0.1 + 0.2 * np.log(100))
    assert default_c2(3, 2, 2, 100, M=2.0, mode="theoretical") == pytest.approx(25 / 4 * 2)
    cfg = TournamentConfig(J=2, k=2, M=1.0, C1=1.0, C2=1.0)
    c2p, c3 = cfg.constants(2, 1000)
    assert c2p > 0 and c3 > 0
    assert TournamentConfig(2, 2, 1.0, 1.0, 1.0, C2p=0.5, C3=7.0).constants(2, 1000) == (0.5, 7.0)
    with pytest.raises(ValueError):
        TournamentConfig(J=0, k=2, M=1, C1=1, C2=1)


def run(T, seed=0, noise=NoiseSpec(), **kw):
    f = SyntheticObjective("f1", 2, noise)
    clock = BudgetClock(T)
    oracle = SyntheticOracle(f, clock, counter_rng(seed), noise)
    cfg = TournamentConfig(**{"J": 2, "k": 2, "M": 1.0, "C1": 0.01, "C2": 0.0, "C2p": 0.0, "C3": 1.0, **kw})
    return run_tournament(Domain.unit(2), cfg, oracle), clock


@pytest.mark.parametrize("T", [1, 7, 50, 500, 3001])
def test_budget_conserved(T):
    trace, clock = run(T, noise=NoiseSpec("uniform", 0.1))
    assert clock.used == T
    assert sum(n for _, n in clock.events) == T
    assert clock.events[-1][0] == "commit" or trace.commit["periods"] == 0


def test_rounds_shrink_and_keep_optimum():
    trace, clock = run(5000)
    assert trace.completed_rounds
    Ns = [r.N for r in trace.rounds]
    assert all(b > a for a, b in zip(Ns, Ns[1:]))
    for r in trace.completed_rounds:
        assert (1, 1) in r.retained
    assert trace.commit["cube"] == [1, 1]


def test_no_round_when_budget_small():
    trace, clock = run(10, C3=1e6)
    assert not trace.rounds
    assert trace.commit["periods"] == 10
    np.testing.assert_allclose(trace.commit["x"], [0.25, 0.25])


def test_trace_json_roundtrip():
    import json

    trace, _ = run(500)
    doc = json.loads(json.dumps(trace.to_json()))
    assert doc["T"] == 500 and len(doc["rounds"]) == len(trace.rounds)


def test_bracket_of_eight():
    vals = {float(i): 0.1 * ((3 * i) % 8) for i in range(1, 9)}
    oracle = TableOracle(vals)
    rec = RoundRecord(1, 0.5, 1, [])
    winner = single_elim(champs(vals), 1, oracle, rec)
    assert len(rec.matches) == 7 and rec.bracket_rounds == 3
    assert vals[float(winner[0])] == max(vals.values())


def test_equal_champions_all_retained():
    vals = {1.0: 0.3, 2.0: 0.3, 3.0: 0.3}
    assert threshold_eliminate((1,), champs(vals), 1, 0.25, 0.1, TableOracle(vals)) == [(1,), (2,), (3,)]
