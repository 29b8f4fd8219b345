import csv
import json
import math

import numpy as np
import pytest

from nomaris.cli import main
from nomaris.metrics import Design, check_feasible, sum_rate
from nomaris.orchestrator import (Baseline, BaselineKind, RunStatus, TimeSharedDesign, ao_solve,
                                  default_grid, emit_beampattern, evaluate_run, initialize, prepare,
                                  run_baseline, run_experiment, slot_scenario)
from nomaris.scenario import InfeasibleScenario, SystemConfig


@pytest.fixture(scope="module")
def scene():
    return prepare(SystemConfig(), 3)


@pytest.fixture(scope="module")
def proposed(scene):
    cfg, ch, v0 = scene
    return run_baseline("Proposed", cfg, ch, v0=v0)


# --------------------------------------------------------------------------
# initialization
# --------------------------------------------------------------------------

def test_generous_thresholds_need_no_restoration():
    # one user and no target: no SIC power-order constraint for matched beams to break
    cfg, ch, v0 = prepare(SystemConfig(K=1, L=0, sinr_threshold_db=-20.0), 0)
    design, rounds = initialize(cfg, ch, v0=v0)
    assert rounds == 0
    assert check_feasible(cfg, ch, design, 1e-6)


def test_hopeless_budget_is_reported():
    cfg, ch, v0 = prepare(SystemConfig(p_max_dbm=-40.0, sinr_threshold_db=30.0), 0)
    with pytest.raises(InfeasibleScenario):
        initialize(cfg, ch, v0=v0)


def test_restoration_succeeds_at_desk_scale():
    ok = 0
    for seed in range(10):
        cfg, ch, v0 = prepare(SystemConfig(), seed)
        try:
            design, rounds = initialize(cfg, ch, v0=v0)
        except InfeasibleScenario:
            continue
        ok += bool(check_feasible(cfg, ch, design, 1e-6))
    assert ok >= 9


def test_initialize_needs_phases():
    cfg, ch, _ = prepare(SystemConfig(), 0)
    with pytest.raises(ValueError):
        initialize(cfg, ch)


# --------------------------------------------------------------------------
# AO loop
# --------------------------------------------------------------------------

def test_infinite_tolerance_stops_after_one_iteration(scene):
    cfg, ch, v0 = scene
    init, _ = initialize(cfg, ch, v0=v0)
    design, trace = ao_solve(cfg, ch, init, epsilon=math.inf)
    assert len(trace) == 1 and trace.status is RunStatus.CONVERGED


def test_iteration_cap(scene):
    cfg, ch, v0 = scene
    init, _ = initialize(cfg, ch, v0=v0)
    design, trace = ao_solve(cfg, ch, init, epsilon=-math.inf, max_iters=2)
    assert len(trace) == 2 and trace.status is RunStatus.MAX_ITERS


def test_proposed_run_is_monotone_and_feasible(scene, proposed):
    cfg, ch, _ = scene
    design, trace = proposed
    assert trace.status is RunStatus.CONVERGED
    rates = trace.sum_rates
    assert all(b >= a - 1e-6 for a, b in zip(rates, rates[1:]))
    assert check_feasible(cfg, ch, design, 1e-5)
    assert design.aux["sum_rate"] == pytest.approx(sum_rate(cfg, ch, design))
    assert np.allclose(np.abs(design.v), 1.0)
    json.dumps(trace.to_dict())


def test_fine_discrete_phases_track_continuous(scene, proposed):
    cfg, ch, v0 = scene
    design, trace = run_baseline("DiscretePhase:16", cfg, ch, v0=v0)
    assert trace.status is not RunStatus.FAILED_FEASIBILITY
    step = 2 * np.pi / 2 ** 16
    k = np.angle(design.v) / step
    assert np.allclose(k, np.round(k), atol=1e-6)
    assert design.aux["sum_rate"] >= 0.99 * proposed[0].aux["sum_rate"]


def test_comm_only_dominates(scene, proposed):
    cfg, ch, v0 = scene
    design, trace = run_baseline("CommOnly", cfg, ch, v0=v0, warm_start=proposed[0])
    assert not design.W[:, -1].any()
    assert design.aux["sum_rate"] >= proposed[0].aux["sum_rate"] - 1e-6


def test_orthogonal_baseline(scene):
    cfg, ch, v0 = scene
    design, trace = run_baseline("WithoutNoma", cfg, ch, v0=v0)
    assert isinstance(design, TimeSharedDesign) and len(design.slots) == ch.K
    for k, d in enumerate(design.slots):
        c, sub = slot_scenario(cfg, ch, k)
        assert design.rates[k] == pytest.approx(sum_rate(c, sub, d))
    rate, margin, ok = evaluate_run("WithoutNoma", cfg, ch, design)
    assert ok and margin >= -1e-4
    assert rate == pytest.approx(np.mean(design.rates))


def test_without_ris_has_no_phases(scene):
    cfg, ch, v0 = scene
    design, trace = run_baseline("WithoutRis", cfg, ch, v0=v0)
    assert design.v.size == 0
    rate, _, ok = evaluate_run("WithoutRis", cfg, ch, design)
    assert ok and rate == pytest.approx(design.aux["sum_rate"])


def test_paired_seed_comparisons():
    # doubling the budget (+3 dB) helps, removing the RIS does not
    more_power = no_ris_worse = 0
    for seed in range(10):
        cfg, ch, v0 = prepare(SystemConfig(), seed)
        low_cfg, low_ch, low_v0 = prepare(SystemConfig(p_max_dbm=40.0 - 10 * math.log10(2.0)), seed)
        prop, _ = run_baseline("Proposed", cfg, ch, v0=v0)
        low, _ = run_baseline("Proposed", low_cfg, low_ch, v0=low_v0)
        flat, _ = run_baseline("WithoutRis", cfg, ch, v0=v0)
        more_power += prop.aux["sum_rate"] > low.aux["sum_rate"]
        no_ris_worse += flat.aux["sum_rate"] <= prop.aux["sum_rate"]
    assert more_power >= 9 and no_ris_worse >= 9


def test_baseline_parsing():
    assert Baseline.parse("proposed").kind is BaselineKind.PROPOSED
    b = Baseline.parse("DiscretePhase:4")
    assert b.bits == 4 and b.label == "DiscretePhase:4"
    assert Baseline.parse("DiscretePhase").bits == 3
    tin = Baseline.parse("WithoutNoma:tin")
    assert not tin.time_shared and not tin.scheme.noma and tin.label == "WithoutNoma:tin"
    assert Baseline.parse("WithoutNoma").time_shared
    assert not Baseline.parse("CommOnly").scheme.sensing
    assert not Baseline.parse("RandomPhase").optimizes_phases
    for bad in ("Nope", "Proposed:2", "WithoutNoma:xyz", "DiscretePhase:0"):
        with pytest.raises(ValueError):
            Baseline.parse(bad)


def test_design_json_roundtrip(proposed):
    d = proposed[0]
    back = Design.from_dict(json.loads(json.dumps(d.to_dict())))
    assert np.array_equal(back.W, d.W) and np.array_equal(back.v, d.v) and np.array_equal(back.u, d.u)


# --------------------------------------------------------------------------
# experiment output
# --------------------------------------------------------------------------

SMALL = {"M": 4, "K": 2, "L": 1, "N": 4, "experiment": {"seeds": [5], "baselines": ["Proposed"]}}


def test_experiment_files_and_byte_identical_rerun(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    res = run_experiment(SMALL, a, timing=False)
    run_experiment(SMALL, b, timing=False)
    rows = list(csv.reader(open(a / "summary.csv")))
    assert len(rows) == 2 and rows[0][0] == "seed" and rows[1][1] == "Proposed"
    assert rows[1][-1] == "0" and res[0].status == "Converged"
    traces = sorted(p.name for p in (a / "traces").iterdir())
    assert traces == ["s0_seed5_Proposed.json"]
    for name in ("summary.csv", "traces/s0_seed5_Proposed.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    body = json.loads((a / "traces" / traces[0]).read_text())
    assert body["trace"]["status"] == "Converged" and body["config"]["N"] == 4


def test_sweep_cells(tmp_path):
    res = run_experiment(SMALL, tmp_path, sweep={"p_max_dbm": [35.0, 40.0]}, timing=False)
    assert [r.cfg.p_max_dbm for r in res] == [35.0, 40.0]
    assert len(list((tmp_path / "traces").iterdir())) == 2
    with pytest.raises(ValueError):
        run_experiment(SMALL, tmp_path, sweep={"N": [4], "M": [4]})


def test_beampattern_output(tmp_path, scene, proposed):
    cfg, ch, _ = scene
    grid = {"x_min": 0.0, "x_max": 10.0, "y_min": -1.0, "y_max": 1.0, "steps": 2}
    rows = emit_beampattern(cfg, ch, proposed[0], grid, tmp_path / "bp.csv")
    assert len(rows) == 4 and {r[:2] for r in rows} == {(0.0, -1.0), (10.0, -1.0), (0.0, 1.0), (10.0, 1.0)}
    lines = (tmp_path / "bp.csv").read_text().splitlines()
    assert lines[0] == "x,y,bp" and len(lines) == 5
    zero = proposed[0].with_(W=np.zeros_like(proposed[0].W))
    assert all(r[2] == 0.0 for r in emit_beampattern(cfg, ch, zero, grid))
    ang = emit_beampattern(cfg, ch, proposed[0], {"theta_min": -90, "theta_max": 90, "steps": 5})
    assert len(ang) == 5 and ang[0][0] == -90.0
    g = default_grid(cfg)
    for p in [cfg.geometry.bs, cfg.geometry.ris, *cfg.geometry.users, *cfg.geometry.targets]:
        assert g["x_min"] < p[0] < g["x_max"] and g["y_min"] < p[1] < g["y_max"]


# --------------------------------------------------------------------------
# command line
# --------------------------------------------------------------------------

def test_cli_selftest(capsys):
    assert main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_cli_run(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(SMALL))
    assert main(["run", str(cfg), "--out", str(tmp_path / "o"), "--no-timing"]) == 0
    assert "status=Converged" in capsys.readouterr().out
    assert (tmp_path / "o" / "summary.csv").exists()
    assert (tmp_path / "o" / "design_seed5_Proposed.json").exists()


def test_cli_exit_codes(tmp_path):
    assert main(["run", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"M": 4, "K": 2, "L": 1, "N": 4, "p_max_dbm": -40.0, "sinr_threshold_db": 30.0}))
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["run", "--baseline", "Bogus", "--out", str(tmp_path / "o")]) == 1
    with pytest.raises(SystemExit):
        main(["sweep"])
