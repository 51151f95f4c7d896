import csv
import json

import numpy as np
import pytest

from plateflow.cli import SCHEMA_VERSION, SWEEP_COLUMNS, main
from plateflow.integrator import TRAJECTORY_COLUMNS


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


SHORT = """
[physics]
drag_sigma = 0.1
[discretization]
n_plate = 4
m1 = 4
m3 = 4
dt = 0.01
t_final = 0.5
"""


def test_simulate_writes_outputs(tmp_path):
    cfg = _write(tmp_path, SHORT + "[output]\ndump_states = true\n")
    out = tmp_path / "o"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    rows = _rows(out / "trajectory.csv")
    assert tuple(rows[0]) == TRAJECTORY_COLUMNS
    assert len(rows) == 52
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == SCHEMA_VERSION
    assert summary["exit_status"] == 0 and summary["completed"]
    assert summary["energy"]["max_residual"] <= 1e-12
    states = _rows(out / "states.csv")
    assert len(states[0]) == 1 + 16 + 4 + 4


def test_defaults_without_config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["stability-check"]) == 0
    assert (tmp_path / "out" / "stability.csv").exists()


def test_invalid_dt_exits_2(tmp_path):
    cfg = _write(tmp_path, "[discretization]\ndt = 0\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_malformed_and_missing_config_exit_2(tmp_path):
    bad = _write(tmp_path, "[physics]\nnu = fast\n")
    assert main(["simulate", "--config", bad, "--out", str(tmp_path / "o")]) == 2
    unknown = _write(tmp_path, "[mystery]\nx = 1\n", "u.ini")
    assert main(["simulate", "--config", unknown, "--out", str(tmp_path / "o")]) == 2
    assert main(["simulate", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path / "o")]) == 2


def test_newton_failure_exits_3(tmp_path):
    cfg = _write(tmp_path, """
[physics]
force_model = berger
berger_gamma = 120
[discretization]
dt = 100
t_final = 500
scheme = midpoint_discrete_gradient
""")
    out = tmp_path / "o"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["exit_status"] == 3 and not summary["completed"]


def test_stability_check_detects_violation(tmp_path):
    cfg = _write(tmp_path, "[physics]\nk = 1000\ndrag_sigma = 0\n")
    out = tmp_path / "o"
    assert main(["stability-check", "--config", cfg, "--out", str(out)]) == 0
    rows = _rows(out / "stability.csv")
    assert rows[1][rows[0].index("satisfied")] == "False"
    assert float(rows[1][rows[0].index("margin")]) < 0


def test_modes_csv_shape(tmp_path):
    cfg = _write(tmp_path, "[discretization]\nn_plate = 5\n")
    out = tmp_path / "o"
    assert main(["modes", "--config", cfg, "--out", str(out), "--points", "21"]) == 0
    rows = _rows(out / "modes.csv")
    assert len(rows[0]) == 6 and len(rows) == 22
    vals = np.array(rows[1:], dtype=float)
    assert vals[0, 0] == 0.0 and vals[-1, 0] == 1.0
    assert np.abs(vals[[0, -1], 1:]).max() < 1e-12
    eig = np.array(_rows(out / "eigenvalues.csv")[1:], dtype=float)
    assert np.all(np.diff(eig[:, 1]) > 0)


def test_stationary_branches(tmp_path):
    cfg = _write(tmp_path, "[physics]\nforce_model = berger\nberger_gamma = 120\n")
    out = tmp_path / "o"
    assert main(["stationary", "--config", cfg, "--out", str(out), "--gammas", "40,120"]) == 0
    rows = _rows(out / "branches.csv")
    assert rows[0] == ["Gamma", "amplitude", "residual"]
    gammas = [float(r[0]) for r in rows[1:]]
    assert gammas.count(40.0) == 1 and gammas.count(120.0) >= 3
    summary = json.loads((out / "summary.json").read_text())
    assert 80 < summary["mu1"] < 81


def test_quasi_stability_command(tmp_path):
    cfg = _write(tmp_path, """
[physics]
force_model = berger
berger_gamma = 120
drag_sigma = 0.1
[discretization]
n_plate = 4
m1 = 4
m3 = 4
t_final = 1
scheme = midpoint_discrete_gradient
""")
    out = tmp_path / "o"
    assert main(["quasi-stability", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["quasi_stability"]["feasible"]
    assert len(_rows(out / "pareto.csv")) > 1


def test_sigma_sweep(tmp_path):
    cfg = _write(tmp_path, SHORT.replace("t_final = 0.5", "t_final = 5"))
    out = tmp_path / "o"
    assert main(["sweep", "--config", cfg, "--out", str(out), "--k", "0",
                 "--sigma", "0.05,0.1,0.2", "--threads", "3"]) == 0
    rows = _rows(out / "sweep.csv")
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 4
    for r in rows[1:]:
        assert r[SWEEP_COLUMNS.index("satisfied")] == "True"
        assert float(r[SWEEP_COLUMNS.index("gamma")]) > 0
        assert r[SWEEP_COLUMNS.index("status")] == "ok"
    assert len(list((out / "points").glob("point_*.csv"))) == 3


def test_sweep_is_deterministic(tmp_path):
    cfg = _write(tmp_path, SHORT)
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["sweep", "--config", cfg, "--out", str(out), "--nu", "0.5,1",
                     "--threads", "2"]) == 0
        texts.append((out / "sweep.csv").read_bytes())
    assert texts[0] == texts[1]


def test_sweep_reports_invalid_points(tmp_path):
    cfg = _write(tmp_path, SHORT)
    out = tmp_path / "o"
    assert main(["sweep", "--config", cfg, "--out", str(out), "--nu", "-1", "--no-run"]) == 0
    rows = _rows(out / "sweep.csv")
    assert rows[1][SWEEP_COLUMNS.index("status")].startswith("invalid")


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["explode"])
