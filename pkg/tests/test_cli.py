import csv
import json
import math
import subprocess
import sys

import pytest

from snapbm import DomainSpec
from snapbm.cli import build_parser, run


def load(path):
    return json.loads(path.read_text())


@pytest.fixture
def disk_json(tmp_path):
    path = tmp_path / "disk.json"
    assert run(["scenario", "disk_one_barrier", "--rb", "0.5", "--lp", "2", "--emit",
                str(path)]) == 0
    return path


def test_scenario_emit_round_trips(disk_json):
    dom = DomainSpec.from_json(disk_json.read_text())
    assert dom.m == 1 and dom.barriers[0].lambda_plus == 2.0


def test_bounds_from_file(disk_json, tmp_path, capsys):
    assert run(["bounds", "--config", str(disk_json), "--out", str(tmp_path)]) == 0
    data = load(tmp_path / "bounds.json")
    assert data["bounds"]["flags"] == {"evaluated": False}
    assert data["geometry"]["lambda_min"] == 1.0
    assert math.isclose(data["geometry"]["R"], 0.25, rel_tol=0.02)
    assert json.loads(capsys.readouterr().out) == data


def test_bounds_diagnostic_exit(disk_json, tmp_path):
    code = run(["bounds", "--config", str(disk_json), "--out", str(tmp_path),
                "--empirical-tmix", "1e9", "--empirical-pimin", "0.3"])
    assert code == 2
    flags = load(tmp_path / "bounds.json")["bounds"]["flags"]
    assert flags["evaluated"] and not flags["all_pass"]


def test_meta_and_seed_from_environment(disk_json, tmp_path, monkeypatch):
    monkeypatch.setenv("SNAPBM_SEED", "77")
    assert run(["geometry", "--config", str(disk_json), "--out", str(tmp_path)]) == 0
    meta = load(tmp_path / "geometry.json")["meta"]
    assert meta["seed"] == 77
    assert set(meta) >= {"config_hash", "seed", "dt", "particles", "version"}
    assert len(meta["config_hash"]) == 64
    assert run(["geometry", "--config", str(disk_json), "--out", str(tmp_path),
                "--seed", "5"]) == 0
    assert load(tmp_path / "geometry.json")["meta"]["seed"] == 5


def test_bad_environment_seed(disk_json, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SNAPBM_SEED", "abc")
    assert run(["geometry", "--config", str(disk_json), "--out", str(tmp_path)]) == 1
    assert "SNAPBM_SEED" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["{not json", '{"boundary": {"type": "square"}}'])
def test_config_errors(tmp_path, text, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(text)
    assert run(["geometry", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_missing_domain_and_file(tmp_path):
    assert run(["geometry", "--out", str(tmp_path)]) == 1
    assert run(["geometry", "--config", str(tmp_path / "nope.json")]) == 1
    assert run(["geometry", "--scenario", "nope", "--out", str(tmp_path)]) == 1


def test_simulate_outputs(disk_json, tmp_path):
    args = ["simulate", "--config", str(disk_json), "--out", str(tmp_path), "--particles", "50",
            "--t-final", "0.2", "--dt", "0.01", "--trajectory", "3", "--snapshots", "5"]
    assert run(args) == 0
    rows = list(csv.reader(open(tmp_path / "final_states.csv")))
    assert rows[0] == ["x", "y", "s_1", "L_1"] and len(rows) == 51
    traj = list(csv.reader(open(tmp_path / "trajectory.csv")))
    assert traj[0][:3] == ["t", "x", "y"] and len(traj) == 6
    first = (tmp_path / "final_states.csv").read_bytes()
    assert run(args) == 0
    assert (tmp_path / "final_states.csv").read_bytes() == first


def test_doeblin_zero_constant_is_diagnostic(disk_json, tmp_path):
    code = run(["doeblin", "--config", str(disk_json), "--out", str(tmp_path), "--particles",
                "200", "--T", "0.01", "--dt", "0.005", "--start-pitch", "0.5"])
    assert code == 2
    data = load(tmp_path / "summary.json")
    assert data["doeblin_C"] == 0.0 and data["tmix_from_doeblin"] is None


def test_parser_rejects_bad_threads():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["geometry", "--threads", "zero"])


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "snapbm", "scenario", "disk_plain", "--emit",
                          str(tmp_path / "d.json")], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert DomainSpec.from_json((tmp_path / "d.json").read_text()).m == 0


def test_scenario_parameters_with_any_command(tmp_path):
    assert run(["geometry", "--scenario", "nested_circles", "--n", "2", "--out",
                str(tmp_path)]) == 0
    geo = load(tmp_path / "geometry.json")["geometry"]
    assert math.isclose(geo["delta"], 10, rel_tol=0.02)
