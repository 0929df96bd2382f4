"""Experiment configuration files (JSON, ``schema_version`` 1).

Layout::

    {
      "schema_version": 1,
      "name": "synth_f1",
      "seed": 20240601,
      "replications": 50,
      "T": [3000, 4000, 5000],
      "defaults": {"algorithm": "tournament", "objective": "f1", "d": 3, ...},
      "cells": [{"grid": {"k": [2, 3, 4]}}]
    }

Each entry of ``cells`` is merged over ``defaults``; a cell's ``grid`` maps
dotted field paths to lists of values and expands into their cartesian
product. Every expanded cell is validated into a :class:`CellSpec`.
"""

from __future__ import annotations

import copy
import itertools
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from pairbandit.errors import ConfigError

SCHEMA_VERSION = 1
ALGORITHMS = ("tournament", "pgd")
OBJECTIVES = ("f1", "f2", "f3", "f4", "inventory")
TOP_LEVEL = {"schema_version", "name", "seed", "replications", "T", "defaults", "cells",
             "workers", "description"}


@dataclass(frozen=True)
class CellSpec:
    algorithm: str
    objective: str
    d: int = 1
    metric: str | None = None
    label: str | None = None
    noise: dict = field(default_factory=lambda: {"kind": "uniform", "scale": 0.1})
    inventory: dict | None = None
    penalty: dict = field(default_factory=lambda: {"kind": "zero"})
    gamma1: float = 0.01
    gamma2: float = 0.01
    # tournament / LinUCB
    k: int | None = None
    J: int = 3
    G: int = 10
    M: float | str = 1e-4
    mode: str = "practical"
    c1_log_factor: float | None = None
    C2_scale: float = 1.0
    c2p_scale: float = 1.0
    c3_scale: float = 1.0
    C2p: float | None = None
    C3: float | None = None
    index_cap: float | None = None
    # pgd
    sigma: float | str = 1.0
    eta: float | None = None
    alpha: float | None = None
    pgd_M: float | str | None = None
    margin: float = 0.05
    traces: bool = False

    @property
    def metric_mode(self) -> str:
        if self.metric is not None:
            return self.metric
        return "action" if self.objective == "inventory" else "pair"

    @property
    def objective_label(self) -> str:
        if self.label:
            return self.label
        if self.objective != "inventory":
            return self.objective
        inv = self.inventory
        noise = inv["noise"]
        return (
            f"inventory-{inv['curve']}-{noise['kind']}{_fmt(noise['scale'])}"
            f"-h{_fmt(inv['h'])}-b{_fmt(inv['b'])}"
        )

    @property
    def k_label(self) -> str:
        return "" if self.k is None or self.algorithm != "tournament" else str(self.k)


def _fmt(v) -> str:
    return f"{float(v):g}"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int
    replications: int
    T: tuple[int, ...]
    cells: tuple[CellSpec, ...]
    workers: int | None = None
    source: dict = field(default_factory=dict, repr=False, compare=False)

    def with_overrides(self, seed: int | None = None, reps: int | None = None) -> "ExperimentConfig":
        return ExperimentConfig(
            self.name,
            self.seed if seed is None else int(seed),
            self.replications if reps is None else int(reps),
            self.T,
            self.cells,
            self.workers,
            self.source,
        )


def _require(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(path, msg)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _set_path(d: dict, dotted: str, value) -> dict:
    out = copy.deepcopy(d)
    node = out
    parts = dotted.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    last = parts[-1]
    if isinstance(value, dict) and isinstance(node.get(last), dict):
        node[last] = _deep_merge(node[last], value)
    else:
        node[last] = copy.deepcopy(value)
    return out


def _expand(raw: dict, path: str) -> list[dict]:
    grid = raw.get("grid", {})
    _require(isinstance(grid, dict), f"{path}.grid", "must be an object")
    base = {k: v for k, v in raw.items() if k != "grid"}
    if not grid:
        return [base]
    keys = list(grid)
    for key in keys:
        _require(isinstance(grid[key], list) and grid[key], f"{path}.grid.{key}",
                 "must be a nonempty list")
    out = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cell = base
        for key, val in zip(keys, combo):
            cell = _set_path(cell, key, val)
        out.append(cell)
    return out


def _check_noise(noise, path: str) -> None:
    _require(isinstance(noise, dict), path, "must be an object")
    _require(set(noise) <= {"kind", "scale"}, path, f"unknown keys {sorted(set(noise) - {'kind', 'scale'})}")
    _require(noise.get("kind") in ("none", "uniform", "normal"), f"{path}.kind",
             "must be none, uniform or normal")
    _require(_is_num(noise.get("scale", 0.0)) and noise.get("scale", 0.0) >= 0, f"{path}.scale",
             "must be a nonnegative number")


def _check_inventory(inv, path: str) -> None:
    _require(isinstance(inv, dict), path, "must be an object for the inventory objective")
    allowed = {"curve", "noise", "h", "b", "price_range"}
    _require(set(inv) <= allowed, path, f"unknown keys {sorted(set(inv) - allowed)}")
    _require(inv.get("curve") in ("exponential", "logit", "bimodal"), f"{path}.curve",
             "must be exponential, logit or bimodal")
    _check_noise(inv.get("noise"), f"{path}.noise")
    for key in ("h", "b"):
        _require(_is_num(inv.get(key)) and inv[key] > 0, f"{path}.{key}", "must be a positive number")
    if "price_range" in inv:
        pr = inv["price_range"]
        _require(isinstance(pr, list) and len(pr) == 2 and all(map(_is_num, pr)) and pr[0] < pr[1],
                 f"{path}.price_range", "must be [lo, hi] with lo < hi")


def _check_penalty(pen, path: str) -> None:
    _require(isinstance(pen, dict), path, "must be an object")
    kind = pen.get("kind")
    _require(kind in ("zero", "max_affine"), f"{path}.kind", "must be zero or max_affine")
    if kind == "max_affine":
        for key in ("A", "cap", "p_bar", "n_products", "A_min"):
            _require(key in pen, f"{path}.{key}", "is required for max_affine")
        _require(_is_num(pen["A_min"]) and pen["A_min"] > 0, f"{path}.A_min", "must be positive")


def _validate_cell(raw: dict, path: str) -> CellSpec:
    known = {f.name for f in fields(CellSpec)}
    unknown = sorted(set(raw) - known)
    _require(not unknown, path, f"unknown fields {unknown}")
    _require(raw.get("algorithm") in ALGORITHMS, f"{path}.algorithm", f"must be one of {ALGORITHMS}")
    _require(raw.get("objective") in OBJECTIVES, f"{path}.objective", f"must be one of {OBJECTIVES}")
    cell = dict(raw)
    if cell["objective"] == "inventory":
        _check_inventory(cell.get("inventory"), f"{path}.inventory")
        cell["d"] = 1
    else:
        _require(_is_int(cell.get("d")) and cell["d"] >= 1, f"{path}.d", "must be a positive integer")
        if "noise" in cell:
            _check_noise(cell["noise"], f"{path}.noise")
    if "penalty" in cell:
        _check_penalty(cell["penalty"], f"{path}.penalty")
    if cell.get("metric") is not None:
        _require(cell["metric"] in ("pair", "action"), f"{path}.metric", "must be pair or action")
        if cell["metric"] == "action":
            _require(cell["objective"] == "inventory", f"{path}.metric",
                     "action mode needs per-period rewards (inventory only)")
    for key in ("gamma1", "gamma2"):
        if key in cell:
            _require(_is_num(cell[key]) and cell[key] >= 0, f"{path}.{key}", "must be nonnegative")

    if cell["algorithm"] == "tournament":
        _require(_is_int(cell.get("k")) and cell["k"] >= 1, f"{path}.k",
                 "is required for the tournament and must be a positive integer")
        for key in ("J", "G"):
            if key in cell:
                _require(_is_int(cell[key]) and cell[key] >= (2 if key == "G" else 1), f"{path}.{key}",
                         "must be an integer (G >= 2, J >= 1)")
        if "M" in cell:
            _require((_is_num(cell["M"]) and cell["M"] > 0) or cell["M"] == "inv_sqrt_nu",
                     f"{path}.M", "must be a positive number or 'inv_sqrt_nu'")
        if "mode" in cell:
            _require(cell["mode"] in ("theoretical", "practical"), f"{path}.mode",
                     "must be theoretical or practical")
        for key in ("C2_scale", "c2p_scale", "c3_scale", "c1_log_factor", "C2p", "C3", "index_cap"):
            if cell.get(key) is not None:
                _require(_is_num(cell[key]) and cell[key] >= 0, f"{path}.{key}", "must be nonnegative")
    else:
        for key in ("sigma", "pgd_M"):
            v = cell.get(key)
            if v is not None:
                _require((_is_num(v) and v > 0) or v == "auto", f"{path}.{key}",
                         "must be a positive number or 'auto'")
        if cell.get("sigma") == "auto" or cell.get("pgd_M") == "auto":
            _require(cell["objective"] == "inventory", f"{path}.sigma",
                     "'auto' curvature is only available for the inventory objective")
        for key in ("eta", "alpha"):
            if cell.get(key) is not None:
                _require(_is_num(cell[key]) and cell[key] > 0, f"{path}.{key}", "must be positive")
        if cell.get("eta") is None or cell.get("alpha") is None:
            _require(cell.get("pgd_M") is not None, f"{path}.pgd_M",
                     "is required when eta or alpha is not given")
        if "margin" in cell:
            _require(_is_num(cell["margin"]) and 0 <= cell["margin"] < 0.5, f"{path}.margin",
                     "must lie in [0, 0.5)")
    return CellSpec(**cell)


def parse_config(doc: Any) -> ExperimentConfig:
    _require(isinstance(doc, dict), "$", "config must be a JSON object")
    _require(doc.get("schema_version") == SCHEMA_VERSION, "schema_version",
             f"must be {SCHEMA_VERSION}")
    unknown = sorted(set(doc) - TOP_LEVEL)
    _require(not unknown, "$", f"unknown top-level fields {unknown}")
    name = doc.get("name", "experiment")
    _require(isinstance(name, str) and name, "name", "must be a nonempty string")
    seed = doc.get("seed", 0)
    _require(_is_int(seed) and seed >= 0, "seed", "must be a nonnegative integer")
    reps = doc.get("replications", 50)
    _require(_is_int(reps) and reps >= 1, "replications", "must be a positive integer")
    T = doc.get("T")
    _require(isinstance(T, list) and T and all(_is_int(t) and t >= 1 for t in T), "T",
             "must be a nonempty list of positive integers")
    _require(T == sorted(T) and len(set(T)) == len(T), "T", "must be strictly increasing")
    workers = doc.get("workers")
    _require(workers is None or (_is_int(workers) and workers >= 1), "workers",
             "must be a positive integer")
    defaults = doc.get("defaults", {})
    _require(isinstance(defaults, dict), "defaults", "must be an object")
    raw_cells = doc.get("cells", [{}])
    _require(isinstance(raw_cells, list) and raw_cells, "cells", "must be a nonempty list")
    cells = []
    for i, raw in enumerate(raw_cells):
        _require(isinstance(raw, dict), f"cells[{i}]", "must be an object")
        merged = _deep_merge(defaults, raw)
        for j, cell in enumerate(_expand(merged, f"cells[{i}]")):
            path = f"cells[{i}]" if "grid" not in merged else f"cells[{i}].grid[{j}]"
            cells.append(_validate_cell(cell, path))
    return ExperimentConfig(name, seed, reps, tuple(T), tuple(cells), workers, doc)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(str(path), "file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return parse_config(doc)
