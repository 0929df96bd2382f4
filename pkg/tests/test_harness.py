import csv
import json

import numpy as np
import pytest

from pairbandit.environments import SyntheticObjective
from pairbandit.errors import ConfigError
from pairbandit.harness.cli import main
from pairbandit.harness.config import load_config, parse_config
from pairbandit.harness.ledger import PenaltyFunction, RegretLedger
from pairbandit.harness.runner import RESULT_COLUMNS, SUMMARY_COLUMNS, run_experiment, run_replication


def tiny_doc(**over):
    doc = {
        "schema_version": 1,
        "name": "tiny",
        "seed": 7,
        "replications": 2,
        "T": [60, 120],
        "defaults": {"objective": "f4", "d": 2, "noise": {"kind": "uniform", "scale": 0.1},
                     "gamma1": 0.01, "gamma2": 0.005},
        "cells": [
            {"algorithm": "tournament", "J": 2, "k": 2, "M": 0.0001, "G": 4},
            {"algorithm": "pgd", "sigma": 1.0, "eta": 1.0, "alpha": 1.0},
        ],
    }
    doc.update(over)
    return doc


def test_ledger_pair_mode():
    f = SyntheticObjective("f4", 2)
    led = RegretLedger(f.f_star, "pair", f)
    led.record(10, np.zeros(2), np.full(2, 0.25))
    led(5, np.full(2, 0.25), np.full(2, 0.25))
    assert led.cumulative == pytest.approx(10 * (1 - 0.9375))
    assert led.relative_regret(15) == pytest.approx(100 * 0.625 / 30)
    assert led.replay() == led.cumulative
    with pytest.raises(RuntimeError):
        led.record(1, np.zeros(2), np.zeros(2))


def test_ledger_action_mode_and_validation():
    led = RegretLedger(10.0, "action")
    led.record(3, [0.5], [0.5], rewards=[9.0, 10.0, 8.0])
    assert led.relative_regret(3) == pytest.approx(100 * 3 / 30)
    with pytest.raises(ValueError):
        RegretLedger(1.0, "pair")
    with pytest.raises(ValueError):
        RegretLedger(1.0, "action").record(2, [0], [0], rewards=[1.0])


def test_penalty_added_once():
    pen = PenaltyFunction.max_affine([[1.0, 1.0]], [0.5], p_bar=2, n_products=2, A_min=1)
    assert pen([0.1, 0.1]) == 0.0
    assert pen([0.5, 0.5]) == pytest.approx(4 * 0.5)
    f = SyntheticObjective("f3", 2)
    led = RegretLedger(f.f_star, "pair", f, pen)
    led.record(4, np.full(2, 0.5), np.full(2, 0.5))
    base = led.total
    assert led.finalize(4) == pytest.approx(base + 4 * 2.0)
    assert led.finalize(4) == pytest.approx(base + 4 * 2.0)


def test_parse_config_grid_and_labels():
    cfg = load_config(__import__("pairbandit.harness", fromlist=["x"]).__path__[0] + "/configs/synth_f1.json")
    assert [c.k for c in cfg.cells] == [2, 3, 4]
    assert cfg.T[0] == 3000 and cfg.replications == 50
    cfg = parse_config(tiny_doc())
    assert cfg.cells[1].k_label == ""
    assert cfg.with_overrides(seed=3, reps=1).seed == 3


@pytest.mark.parametrize("bad", [
    {"schema_version": 2},
    {"T": [100, 50]},
    {"replications": 0},
    {"cells": [{"algorithm": "annealing"}]},
])
def test_parse_config_errors(bad):
    with pytest.raises(ConfigError):
        parse_config(tiny_doc(**bad))


def test_load_config_errors(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_replication_consumes_T_and_replays():
    cfg = parse_config(tiny_doc())
    for cell in cfg.cells:
        row = run_replication(cell, 120, 0, cfg.seed)
        assert row.cum_regret == row.replayed
        assert row.rel_regret_pct >= 0


def test_experiment_files_and_determinism(tmp_path):
    cfg = parse_config(tiny_doc())
    run_experiment(cfg, tmp_path / "a", plot=True, workers=1)
    run_experiment(cfg, tmp_path / "b", plot=True, workers=2)
    for name in ("summary.csv", "plot.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def strip(path):
        rows = list(csv.reader(open(path)))
        return [r[:-1] for r in rows]

    a, b = strip(tmp_path / "a" / "results.csv"), strip(tmp_path / "b" / "results.csv")
    assert a == b
    assert tuple(next(csv.reader(open(tmp_path / "a" / "results.csv")))) == RESULT_COLUMNS
    summary = list(csv.DictReader(open(tmp_path / "a" / "summary.csv")))
    assert tuple(summary[0]) == SUMMARY_COLUMNS
    assert len(a) == 1 + 2 * 2 * 2 and len(summary) == 4


def test_cli(tmp_path, capsys):
    cfg_path = tmp_path / "tiny.json"
    cfg_path.write_text(json.dumps(tiny_doc()))
    assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o"), "--reps", "1",
                 "--workers", "1"]) == 0
    assert (tmp_path / "o" / "results.csv").exists()
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2
    assert main(["configs"]) == 0
    assert "synth_f1.json" in capsys.readouterr().out


def test_relative_regret_endpoints():
    zero = RegretLedger(1.0, "pair", lambda x: 1.0)
    zero.record(10, [0.0], [0.0])
    assert zero.relative_regret(10) == 0.0
    worst = RegretLedger(1.0, "pair", lambda x: 0.0)
    worst.record(10, [0.0], [0.0])
    assert worst.relative_regret(10) == 100.0
