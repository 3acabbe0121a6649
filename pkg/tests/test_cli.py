import subprocess
import sys

import pytest
import yaml

from seqtunnel.cli import EFFECTIVE_CONFIG, run


def write(tmp_path, data, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


FAST = {
    "solver": {"M": 40, "sample_count": 4096},
    "outputs": {"cavity_points": 64, "ground_x": {"min": -20.0, "max": 20.0, "count": 41}},
}


def test_empty_stage_list_is_config_error(tmp_path, capsys):
    assert run(["solve", "--config", str(write(tmp_path, {"stages": []})), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_stage(tmp_path):
    cfg = write(tmp_path, {"stages": "paper-4stage"})
    assert run(["map-only", "--config", str(cfg), "--stage", "9", "--out", str(tmp_path / "o")]) == 2


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SEQTUNNEL_THREADS", "many")
    cfg = write(tmp_path, {"stages": "paper-4stage"})
    assert run(["map-only", "--config", str(cfg), "--stage", "2", "--out", str(tmp_path / "o")]) == 2


def test_map_only_writes_grid(tmp_path):
    cfg = write(tmp_path, {"stages": "paper-4stage", "outputs": {"grid": {"rho_lines": 3, "theta_lines": 4,
                                                                          "samples_per_line": 5}}})
    out = tmp_path / "o"
    assert run(["map-only", "--config", str(cfg), "--stage", "1", "--out", str(out)]) == 0
    lines = (out / "stage_1" / "grid.csv").read_text().splitlines()
    assert lines[0] == "family,value,param,x,y"
    assert len(lines) == 1 + (3 + 4) * 5
    assert (out / EFFECTIVE_CONFIG).exists()


def test_solve_is_deterministic_and_echoes_config(tmp_path, monkeypatch):
    cfg = write(tmp_path, dict(FAST, stages=[{"benchmark": 1}, {"benchmark": 2}]))
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["solve", "--config", str(cfg), "--out", str(a)]) == 0
    monkeypatch.setenv("SEQTUNNEL_THREADS", "2")
    assert run(["solve", "--config", str(cfg), "--out", str(b)]) == 0
    for stage in ("stage_1", "stage_2"):
        for name in ("cavity_profile.csv", "ground_profile.csv", "coefficients.csv"):
            assert (a / stage / name).read_bytes() == (b / stage / name).read_bytes()
    # the echoed config reproduces the run
    c = tmp_path / "c2"
    assert run(["solve", "--config", str(a / EFFECTIVE_CONFIG), "--stage", "2", "--out", str(c)]) == 0
    assert (c / "stage_2" / "cavity_profile.csv").read_bytes() == (a / "stage_2" / "cavity_profile.csv").read_bytes()
    header = (a / "stage_2" / "cavity_profile.csv").read_text().splitlines()[0]
    assert header == "theta,x,y,mises_kpa,sigma_rho_kpa,tau_rhotheta_kpa,u_m,v_m"


def test_verify_exit_code_reflects_failures(tmp_path):
    # a coarse truncation cannot meet the residual limits
    cfg = write(tmp_path, dict(FAST, stages=[{"benchmark": 2}]))
    out = tmp_path / "v"
    assert run(["verify", "--config", str(cfg), "--out", str(out)]) == 1
    assert (out / "report.json").exists() and (out / "report.txt").exists()
    loose = write(tmp_path, dict(FAST, stages=[{"benchmark": 2}], thresholds={"residual_fraction": 10.0,
                                                                               "resultant_rel": 1.0}), "l.yaml")
    assert run(["verify", "--config", str(loose), "--out", str(out)]) == 0


def test_sweep_kx(tmp_path, capsys):
    cfg = write(tmp_path, dict(FAST, stages=[{"benchmark": 2}], sweeps={"kx": [0.8, 1.2]}))
    out = tmp_path / "s"
    assert run(["sweep", "--config", str(cfg), "--sweep", "kx", "--out", str(out)]) == 0
    assert (out / "sweep_kx.csv").read_text().count("\n") == 3
    assert "kx=1.2" in capsys.readouterr().out


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "seqtunnel.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "map-only" in r.stdout
