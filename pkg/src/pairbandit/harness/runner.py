"""Replication runner and result files."""

from __future__ import annotations

import csv
import functools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pairbandit.environments import InventoryModel, InventoryOracle, SyntheticObjective, clairvoyant
from pairbandit.geometry import Domain, feature_dim
from pairbandit.harness.config import CellSpec, ExperimentConfig
from pairbandit.harness.ledger import PenaltyFunction, RegretLedger
from pairbandit.oracle import BudgetClock, NoiseSpec, SyntheticOracle, counter_rng
from pairbandit.pgd import PgdConfig, run_pgd
from pairbandit.tournament import TournamentConfig, default_c2, run_tournament

RESULT_COLUMNS = ("algorithm", "objective", "d", "k", "T", "rep", "seed",
                  "cum_regret", "rel_regret_pct", "wall_ms")
SUMMARY_COLUMNS = ("algorithm", "objective", "d", "k", "T", "metric", "reps",
                   "mean", "std", "stderr")


@dataclass(frozen=True)
class Row:
    cell: int
    algorithm: str
    objective: str
    d: int
    k: str
    T: int
    rep: int
    seed: int
    metric: str
    cum_regret: float
    rel_regret_pct: float
    wall_ms: float
    replayed: float

    def csv_fields(self) -> list[str]:
        return [self.algorithm, self.objective, str(self.d), self.k, str(self.T), str(self.rep),
                str(self.seed), repr(self.cum_regret), repr(self.rel_regret_pct),
                f"{self.wall_ms:.3f}"]


def _noise(spec: dict) -> NoiseSpec:
    return NoiseSpec(spec.get("kind", "none"), float(spec.get("scale", 0.0)))


def inventory_model(cell: CellSpec) -> InventoryModel:
    inv = cell.inventory
    pr = tuple(inv["price_range"]) if "price_range" in inv else None
    return InventoryModel(inv["curve"], _noise(inv["noise"]), float(inv["h"]), float(inv["b"]), pr)


@functools.lru_cache(maxsize=64)
def _clairvoyant(model: InventoryModel):
    return clairvoyant(model)


@functools.lru_cache(maxsize=64)
def curvature_bounds(model: InventoryModel, m: int = 401) -> tuple[float, float]:
    """(min -G'', max |G''|) of the normalized-price profit curve, by second differences."""
    x = np.linspace(0.0, 1.0, m)
    g = np.asarray(model.G_unit(x), dtype=float)
    step = x[1] - x[0]
    second = (g[2:] - 2 * g[1:-1] + g[:-2]) / step**2
    return float(np.min(-second)), float(np.max(np.abs(second)))


def penalty_of(cell: CellSpec) -> PenaltyFunction:
    pen = cell.penalty
    if pen.get("kind", "zero") == "zero":
        return PenaltyFunction()
    return PenaltyFunction.max_affine(pen["A"], pen["cap"], pen["p_bar"], pen["n_products"], pen["A_min"])


def tournament_config(cell: CellSpec, T: int) -> TournamentConfig:
    d, k = cell.d, cell.k
    nu = feature_dim(k, d)
    M = 1 / math.sqrt(nu) if cell.M == "inv_sqrt_nu" else float(cell.M)
    factor = cell.c1_log_factor
    if factor is None:
        factor = 2.0 if cell.mode == "theoretical" else 1.0
    C1 = cell.gamma1 + factor * cell.gamma2 * math.log(T)
    C2 = default_c2(d, k, cell.J, T, M, cell.mode, cell.C2_scale)
    return TournamentConfig(cell.J, k, M, C1, C2, cell.mode, cell.G, cell.index_cap,
                            cell.c2p_scale, cell.c3_scale, cell.C2p, cell.C3)


def pgd_config(cell: CellSpec, model: InventoryModel | None = None) -> PgdConfig:
    sigma, M = cell.sigma, cell.pgd_M
    if "auto" in (sigma, M):
        lo, hi = curvature_bounds(model)
        if lo <= 0:
            raise ValueError("profit curve is not strongly concave; 'auto' sigma unavailable")
        sigma = lo if sigma == "auto" else sigma
        M = hi if M == "auto" else M
    return PgdConfig(float(sigma), cell.gamma1, cell.gamma2,
                     None if M is None else float(M), cell.eta, cell.alpha)


def run_replication(cell: CellSpec, T: int, rep: int, seed: int, cell_index: int = 0,
                    trace_dir: str | None = None) -> Row:
    """One seeded run: fresh environment, clock and ledger; returns the result row."""
    start = time.perf_counter()
    rng = counter_rng(seed, T, rep)
    penalty = penalty_of(cell)
    mode = cell.metric_mode
    if cell.objective == "inventory":
        model = inventory_model(cell)
        sol = _clairvoyant(model)
        ledger = RegretLedger(sol.R_star, mode, model.G_unit, penalty)
        clock = BudgetClock(T, ledger.record)
        oracle = InventoryOracle(model, clock, rng)
    else:
        model = None
        obj = SyntheticObjective(cell.objective, cell.d, _noise(cell.noise))
        ledger = RegretLedger(obj.f_star, mode, obj, penalty)
        clock = BudgetClock(T, ledger.record)
        oracle = SyntheticOracle(obj, clock, rng, obj.noise)

    domain = Domain.unit(cell.d, cell.margin if cell.algorithm == "pgd" else 0.0)
    if cell.algorithm == "tournament":
        trace = run_tournament(domain, tournament_config(cell, T), oracle)
    else:
        trace = run_pgd(domain, pgd_config(cell, model), oracle)
    if clock.used != T:
        raise AssertionError(f"run consumed {clock.used} of {T} periods")

    cum = ledger.finalize(T)
    rel = ledger.relative_regret(T)
    replayed = ledger.replay()
    wall_ms = 1000.0 * (time.perf_counter() - start)
    if trace_dir is not None:
        path = Path(trace_dir) / f"cell{cell_index}_T{T}_rep{rep}.json"
        path.write_text(json.dumps(trace.to_json(), sort_keys=True))
    return Row(cell_index, cell.algorithm, cell.objective_label, cell.d, cell.k_label, T, rep,
               seed, mode, cum, rel, wall_ms, replayed)


def _task(args) -> Row:
    return run_replication(*args)


def _tasks(cfg: ExperimentConfig, trace_dir: str | None):
    for ci, cell in enumerate(cfg.cells):
        for T in cfg.T:
            for rep in range(cfg.replications):
                yield (cell, T, rep, cfg.seed, ci, trace_dir if cell.traces else None)


def write_results(rows: list[Row], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow(r.csv_fields())


def summarize(rows: list[Row]) -> list[dict]:
    groups: dict[tuple, list[Row]] = {}
    for r in rows:
        groups.setdefault((r.cell, r.T), []).append(r)
    out = []
    for (_, T), rs in groups.items():
        v = np.array([r.rel_regret_pct for r in rs])
        std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        first = rs[0]
        out.append({
            "algorithm": first.algorithm, "objective": first.objective, "d": first.d,
            "k": first.k, "T": T, "metric": first.metric, "reps": int(v.size),
            "mean": float(v.mean()), "std": std, "stderr": std / math.sqrt(v.size),
        })
    return out


def write_summary(summary: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summary:
            w.writerow([s["algorithm"], s["objective"], s["d"], s["k"], s["T"], s["metric"],
                        s["reps"], repr(s["mean"]), repr(s["std"]), repr(s["stderr"])])


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path, plot: bool = False,
                   workers: int | None = None) -> list[Row]:
    """Run every (cell, T, rep) and write results.csv, summary.csv and optionally plot.svg.

    Rows are merged in (cell, T, rep) order whatever the worker count. On
    interrupt the rows finished so far are written before re-raising.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_dir = None
    if any(c.traces for c in cfg.cells):
        trace_dir = str(out / "traces")
        Path(trace_dir).mkdir(exist_ok=True)
    tasks = list(_tasks(cfg, trace_dir))
    workers = workers or cfg.workers or os.cpu_count() or 1
    workers = max(1, min(workers, len(tasks)))
    rows: list[Row] = []
    try:
        if workers == 1:
            for t in tasks:
                rows.append(_task(t))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for row in pool.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))):
                    rows.append(row)
    except KeyboardInterrupt:
        _flush(rows, out, plot=False)
        raise
    _flush(rows, out, plot)
    return rows


def _flush(rows: list[Row], out: Path, plot: bool) -> None:
    rows = sorted(rows, key=lambda r: (r.cell, r.T, r.rep))
    write_results(rows, out / "results.csv")
    summary = summarize(rows)
    write_summary(summary, out / "summary.csv")
    if plot and summary:
        from pairbandit.harness.plot import write_svg

        write_svg(summary, out / "plot.svg")
