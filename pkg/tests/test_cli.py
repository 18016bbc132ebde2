import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from impulse_games import CANONICAL_1D
from impulse_games.cli import main

DETERMINISTIC = """\
[dynamics]
n = 1
b = 0
sigma = 0

[gains]
f = 1
g = 0

[costs]
c = 50
chi = 40
h_min = 0.5

[actions]
U = line
V = line
r_max = 2
m_imp = 5

[domain]
x_min = -5
x_max = 5

[horizon]
T = 1

[grid]
nodes = 41
steps = 16
"""


@pytest.fixture(scope="module")
def solved_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("canonical")
    cfg = d / "canonical.ini"
    cfg.write_text(CANONICAL_1D)
    assert main(["solve", "--config", str(cfg), "--out", str(d / "run")]) == 0
    return cfg, d / "run"


def test_solve_writes_bundle_and_manifest(solved_dir, capsys):
    cfg, run = solved_dir
    for name in ("index.json", "values.f64", "labels.i8", "action_index.i64", "raw_terminal.f64"):
        assert (run / name).exists()
    man = json.loads((run / "manifest_solve.json").read_text())
    assert man["status"] == "ok" and man["finished"]
    assert sorted(man["outputs"]) == sorted(p.name for p in run.iterdir() if not p.name.startswith("manifest"))
    assert man["grid"] == {"nodes": [301], "steps": 64}


def test_solve_prints_probe(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(CANONICAL_1D)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "r"), "--grid", "151,16", "--probe", "0", "3"]) == 0
    out = capsys.readouterr().out
    assert "V(0, 0) = 1" in out and "V(0, 3) =" in out


def test_cfl_violation_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(CANONICAL_1D)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "r"), "--grid", "301,10"]) == 3
    assert "CFL" in capsys.readouterr().err


def test_automatic_time_steps(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(CANONICAL_1D)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "r"), "--grid", "301,auto"]) == 0
    man = json.loads((tmp_path / "r" / "manifest_solve.json").read_text())
    # diffusion term dt * sigma^2 / dx^2 = 25 dt: the smallest admissible K is 25
    assert man["grid"]["steps"] == 25


def test_missing_config_is_usage_error(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path)]) == 1
    assert "usage" in capsys.readouterr().err
    assert main(["solve", "--out", str(tmp_path)]) == 1


def test_bad_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--frobnicate"])
    assert info.value.code == 1


def test_invalid_costs_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(CANONICAL_1D.replace("c = 2", "c = 1"))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2
    assert main(["validate-costs", "--config", str(cfg)]) == 2
    assert main(["check", "--config", str(cfg), "--only=costs", "--out", str(tmp_path / "r")]) == 4
    out = capsys.readouterr().out
    assert "FAIL     c_subadditive: measured=-0.5" in out


def test_check_full_suite(solved_dir, tmp_path, capsys):
    cfg, run = solved_dir
    out = tmp_path / "check"
    assert main(["check", "--config", str(cfg), "--bundle", str(run), "--out", str(out), "--paths", "4000"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["ok"] and "structural_identity" in rep["checks"]
    man = json.loads((out / "manifest_check.json").read_text())
    assert man["outputs"] == ["report.json"] and man["spec_hash"]


def test_check_detects_tampered_bundle(solved_dir, tmp_path, capsys):
    cfg, run = solved_dir
    tampered = tmp_path / "tampered"
    tampered.mkdir()
    for p in run.iterdir():
        (tampered / p.name).write_bytes(p.read_bytes())
    values = np.fromfile(tampered / "values.f64", dtype="<f8")
    values[10 * 301 + 150] += 3.0
    values.tofile(tampered / "values.f64")
    code = main(["check", "--config", str(cfg), "--bundle", str(tampered), "--out", str(tmp_path / "o"),
                 "--only", "structural_identity"])
    assert code == 4
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert not rep["checks"]["structural_identity"]["passed"]


def test_check_rejects_unknown_selection(solved_dir, tmp_path):
    cfg, run = solved_dir
    assert main(["check", "--config", str(cfg), "--bundle", str(run), "--out", str(tmp_path), "--only", "bogus"]) == 1


def test_simulate_and_hash_mismatch(solved_dir, tmp_path, capsys):
    cfg, run = solved_dir
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(cfg), "--bundle", str(run), "--out", str(out), "--paths", "2000",
                 "--path-csv", "2"]) == 0
    est = json.loads((out / "estimate.json").read_text())
    assert est["n_paths"] == 2000 and abs(est["mean"] - 1.0) <= 3 * est["stderr"] + 1.0
    assert (out / "path_0001.csv").exists()
    other = tmp_path / "other.ini"
    other.write_text(CANONICAL_1D.replace("sigma = 0.5", "sigma = 0.4"))
    assert main(["simulate", "--config", str(other), "--bundle", str(run), "--out", str(out)]) == 2
    assert "solved for spec" in capsys.readouterr().err


def test_simulate_deterministic_problem_has_zero_stderr(tmp_path):
    cfg = tmp_path / "det.ini"
    cfg.write_text(DETERMINISTIC)
    run = tmp_path / "run"
    assert main(["solve", "--config", str(cfg), "--out", str(run)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(run), "--paths", "10"]) == 0
    est = json.loads((run / "estimate.json").read_text())
    assert est["stderr"] == 0.0 and est["mean"] == 1.0


def test_export(solved_dir, tmp_path, capsys):
    _, run = solved_dir
    out = tmp_path / "exp"
    assert main(["export", "--bundle", str(run), "--out", str(out), "--slice", "0"]) == 0
    lines = (out / "value_00000.csv").read_text().splitlines()
    assert len(lines) == 302
    labels = {line.split(",")[1] for line in (out / "regions_00000.csv").read_text().splitlines()[1:]}
    assert labels <= {"0", "1", "2"}
    assert main(["export", "--bundle", str(run), "--out", str(out), "--slice", "65"]) == 1


def test_check_reports_are_byte_identical(solved_dir, tmp_path):
    cfg, run = solved_dir
    args = ["check", "--config", str(cfg), "--bundle", str(run), "--paths", "2000", "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_module_entry_point(tmp_path):
    cfg = Path(__file__).resolve().parents[1] / "configs" / "canonical_1d.ini"
    proc = subprocess.run([sys.executable, "-m", "impulse_games", "validate-costs", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "c_subadditive" in proc.stdout
