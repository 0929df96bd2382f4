"""Tournament successive elimination over the cubes of a J^d partition.

Each outer round finds a champion per active cube with iterated batched
LinUCB, runs a single-elimination bracket between champions, and keeps only
the cubes whose champion is within ``eps + C2'`` of the bracket winner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pairbandit.errors import BudgetExhausted
from pairbandit.geometry import Cube, Domain, feature_dim, partition
from pairbandit.linucb import UcbConfig, iterative_batch_lin_ucb
from pairbandit.oracle import PairwiseOracle

CubeIndex = tuple[int, ...]


@dataclass(frozen=True)
class TournamentConfig:
    J: int
    k: int
    M: float
    C1: float
    C2: float
    mode: str = "practical"
    G: int = 10
    index_cap: float | None = None
    c2p_scale: float = 1.0
    c3_scale: float = 1.0
    C2p: float | None = None
    C3: float | None = None

    def __post_init__(self):
        if self.mode not in ("theoretical", "practical"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.J < 1 or self.k < 1:
            raise ValueError("J and k must be at least 1")

    def constants(self, d: int, T: int) -> tuple[float, float]:
        """Return ``(C2', C3)`` for dimension ``d`` and horizon ``T``.

        Practical mode replaces the leading numeric multipliers by one.
        Explicit ``C2p`` / ``C3`` values override the formulas.
        """
        nu = feature_dim(self.k, d)
        log5 = math.log(5 * nu * max(T, 1))
        if self.mode == "theoretical":
            a, b, c, e = 12.0, 116.0, 68.0, 85.0
        else:
            a = b = c = e = 1.0
        c2p = (a * nu + b * self.M) * self.C2 * nu**2 * log5**1.5
        c3 = (c * self.M + e * math.sqrt(self.C1)) ** 2 * self.M**2 * nu**4 * log5**3
        c2p = self.C2p if self.C2p is not None else self.c2p_scale * c2p
        c3 = self.C3 if self.C3 is not None else self.c3_scale * c3
        return c2p, c3

    def ucb(self, T: int) -> UcbConfig:
        return UcbConfig(self.k, self.M, self.C1, self.C2, T, self.mode, self.G, self.index_cap)


@dataclass
class ActiveSet:
    zeta: int
    cubes: list[Cube]
    champions: dict[CubeIndex, np.ndarray] = field(default_factory=dict)

    @property
    def indices(self) -> list[CubeIndex]:
        return [c.j for c in self.cubes]


@dataclass
class Match:
    j: CubeIndex
    j2: CubeIndex
    y: float
    advanced: CubeIndex


@dataclass
class RoundRecord:
    zeta: int
    eps: float
    N: int
    active: list[CubeIndex]
    champions: dict[CubeIndex, list[float]] = field(default_factory=dict)
    matches: list[Match] = field(default_factory=list)
    bracket_rounds: int = 0
    winner: CubeIndex | None = None
    retained: list[CubeIndex] | None = None
    completed: bool = False

    def to_json(self) -> dict:
        return {
            "zeta": self.zeta,
            "eps": self.eps,
            "N": self.N,
            "active_size": len(self.active),
            "active": [list(j) for j in self.active],
            "winner": list(self.winner) if self.winner is not None else None,
            "retained_size": None if self.retained is None else len(self.retained),
            "matches": len(self.matches),
            "bracket_rounds": self.bracket_rounds,
            "completed": self.completed,
        }


@dataclass
class TournamentTrace:
    T: int
    C2p: float
    C3: float
    rounds: list[RoundRecord] = field(default_factory=list)
    commit: dict | None = None

    @property
    def completed_rounds(self) -> list[RoundRecord]:
        return [r for r in self.rounds if r.completed]

    def to_json(self) -> dict:
        return {
            "T": self.T,
            "C2p": self.C2p,
            "C3": self.C3,
            "rounds": [r.to_json() for r in self.rounds],
            "commit": self.commit,
        }


def default_c1(mode: str, gamma1: float, gamma2: float, T: int) -> float:
    """C1 = gamma1 + 2 gamma2 ln T (theoretical) or gamma1 + gamma2 ln T (practical)."""
    factor = 2.0 if mode == "theoretical" else 1.0
    return gamma1 + factor * gamma2 * math.log(max(T, 1))


def default_c2(d: int, k: int, J: int, T: int, M: float = 1.0, mode: str = "practical",
               scale: float = 1.0) -> float:
    """C2 = (d+k)^k M J^-k (theoretical) or scale * (d+k)^k J^-k ln T (practical)."""
    base = (d + k) ** k * J ** (-k)
    if mode == "theoretical":
        return base * M
    return scale * base * math.log(max(T, 1))


def single_elim(champions: list[tuple[CubeIndex, np.ndarray]], N: int,
                oracle: PairwiseOracle, record: RoundRecord | None = None) -> CubeIndex:
    """Single-elimination bracket; returns the surviving cube index.

    Entries are kept in lexicographic order. With an odd count the smallest
    index gets the bye and the rest are paired off adjacently. In a match
    ``(j, j2)`` the oracle estimates ``f(x_j2) - f(x_j)``; ``j2`` advances on a
    nonnegative estimate.
    """
    if not champions:
        raise ValueError("no champions to compare")
    points = dict(champions)
    current = sorted(points)
    rounds = 0
    while len(current) > 1:
        rounds += 1
        nxt = []
        start = 0
        if len(current) % 2 == 1:
            nxt.append(current[0])
            start = 1
        for i in range(start, len(current), 2):
            j, j2 = current[i], current[i + 1]
            y = oracle.invoke(N, points[j], points[j2]).y
            adv = j2 if y >= 0 else j
            nxt.append(adv)
            if record is not None:
                record.matches.append(Match(j, j2, y, adv))
        current = sorted(nxt)
    if record is not None:
        record.bracket_rounds = rounds
    return current[0]


def threshold_eliminate(winner: CubeIndex, champions: list[tuple[CubeIndex, np.ndarray]],
                        N: int, eps: float, C2p: float, oracle: PairwiseOracle) -> list[CubeIndex]:
    """Keep the winner and every cube whose champion trails it by at most ``eps + C2'``."""
    points = dict(champions)
    if winner not in points:
        raise ValueError("winner must be one of the champions")
    kept = [winner]
    for j in sorted(points):
        if j == winner:
            continue
        y = oracle.invoke(N, points[j], points[winner]).y
        if y <= eps + C2p:
            kept.append(j)
    return sorted(kept)


def run_tournament(domain: Domain, cfg: TournamentConfig, oracle: PairwiseOracle,
                   T: int | None = None) -> TournamentTrace:
    """Run the elimination tournament until the oracle's clock is exhausted."""
    clock = oracle.clock
    if T is None:
        T = clock.remaining
    if T != clock.remaining:
        raise ValueError("T must equal the clock's remaining budget")
    C2p, C3 = cfg.constants(domain.d, clock.T)
    ucb = cfg.ucb(clock.T)
    trace = TournamentTrace(T, C2p, C3)

    cubes = partition(domain, cfg.J, cfg.G)
    commit_cube = cubes[0]
    commit_x = cubes[0].anchor.copy()
    N_prev = 0
    zeta = 0
    while clock.remaining > 0:
        zeta += 1
        eps = 2.0**-zeta
        # N grows at least by one per round so tiny C3 still makes progress
        N = max(math.ceil(C3 / eps**2), N_prev + 1)
        N_prev = N
        n_tot = 3 * (len(cubes) - 1) * N
        if clock.remaining < max(n_tot, N):
            break
        record = RoundRecord(zeta, eps, N, [c.j for c in cubes])
        trace.rounds.append(record)
        try:
            champions = []
            for cube in cubes:
                if clock.remaining < N:
                    raise BudgetExhausted(N, clock.remaining)
                x = iterative_batch_lin_ucb(cube, N, ucb, oracle).x
                champions.append((cube.j, x))
                record.champions[cube.j] = x.tolist()
            winner = single_elim(champions, N, oracle, record)
            record.winner = winner
            kept = threshold_eliminate(winner, champions, N, eps, C2p, oracle)
        except BudgetExhausted:
            break
        record.retained = kept
        record.completed = True
        by_index = {c.j: c for c in cubes}
        cubes = [by_index[j] for j in kept]
        # commit target: champion of the smallest surviving cube
        commit_cube, commit_x = cubes[0], dict(champions)[cubes[0].j].copy()

    n = oracle.commit(clock.remaining, commit_x, commit_x)
    trace.commit = {"cube": list(commit_cube.j), "x": commit_x.tolist(), "periods": n}
    return trace
