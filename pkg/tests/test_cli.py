from __future__ import annotations

import json
import subprocess
import sys

import pytest

from locwalk.cli import meta_path, run

HAAR = {"kind": "haar"}
TWO_COIN = {
    "kind": "discrete",
    "atoms": [
        {"coin": "hadamard", "weight": 0.5},
        {"coin": [[0.3, 0.0], [0.0, 0.9539392014169456], [0.0, 0.9539392014169456], [0.3, 0.0]], "weight": 0.5},
    ],
}

SMALL = {
    "simulate": ["--steps", "20"],
    "localize": ["--distances", "2,4", "--horizon", "10", "--realizations", "3"],
    "spectrum": ["--n", "4", "--eta-l", "0.3"],
    "dos": ["--n", "6", "--realizations", "2", "--bins", "16"],
    "lyapunov": ["--grid", "4", "--chain-length", "200", "--realizations", "3"],
    "thouless": ["--n", "6", "--realizations", "2", "--bins", "32", "--grid", "3", "--chain-length", "200", "--chain-realizations", "2"],
    "resolvent": ["--n", "2", "--z-abs", "1.4", "--phase", "0.2"],
    "specpoly": ["--n", "2", "--samples", "16"],
    "check": ["--z", "0.7", "--trials", "3"],
}


@pytest.fixture
def dist_file(tmp_path):
    p = tmp_path / "haar.json"
    p.write_text(json.dumps(HAAR))
    return p


def _ext(cmd):
    return ".json" if cmd in ("check", "spectrum") else ".csv"


@pytest.mark.parametrize("cmd", sorted(SMALL))
def test_command_runs_and_reproduces(cmd, tmp_path, dist_file):
    out = tmp_path / f"first{_ext(cmd)}"
    assert run([cmd, "--dist", str(dist_file), "--seed", "123", "--out", str(out), *SMALL[cmd]]) == 0
    header = json.loads(meta_path(str(out)).read_text())
    assert header["seed"] == 123 and header["command"] == cmd
    assert header["config"]["dist"] == HAAR
    assert header["wall_time_seconds"] >= 0
    again = tmp_path / f"second{_ext(cmd)}"
    assert run([cmd, "--config", str(meta_path(str(out))), "--out", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_random_seed_recorded_and_reused(tmp_path, dist_file):
    out = tmp_path / "a.csv"
    assert run(["simulate", "--dist", str(dist_file), "--out", str(out), "--steps", "15"]) == 0
    header = json.loads(meta_path(str(out)).read_text())
    assert isinstance(header["seed"], int)
    out2 = tmp_path / "b.csv"
    assert run(["simulate", "--config", str(meta_path(str(out))), "--out", str(out2)]) == 0
    assert out2.read_bytes() == out.read_bytes()


def test_flags_override_config(tmp_path, dist_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"steps": 5, "seed": 1, "dist": HAAR}))
    out = tmp_path / "o.csv"
    assert run(["simulate", "--config", str(cfg), "--steps", "7", "--out", str(out)]) == 0
    header = json.loads(meta_path(str(out)).read_text())
    assert header["config"]["steps"] == 7 and header["seed"] == 1
    lines = out.read_text().splitlines()
    assert lines[0] == "site,re_minus,im_minus,re_plus,im_plus,probability"
    assert len(lines) == 1 + 2 * 7 + 1


def test_spectrum_writes_decay_table(tmp_path, dist_file):
    out = tmp_path / "s.json"
    assert run(["spectrum", "--dist", str(dist_file), "--seed", "3", "--n", "5", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert len(data["eigenphases"]) == 24
    assert (tmp_path / "s.decay.csv").read_text().startswith("distance,median_relative_envelope")


def test_check_two_coin(tmp_path):
    d = tmp_path / "two.json"
    d.write_text(json.dumps(TWO_COIN))
    out = tmp_path / "c.json"
    assert run(["check", "--dist", str(d), "--seed", "0", "--z", "0.5", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["verdicts"]["noncompact"] == "certified"
    assert "exceptional" in rep


@pytest.mark.parametrize(
    "argv_tail, message",
    [
        (["--steps", "-3"], "steps"),
        (["--spin", "4"], "spin"),
    ],
)
def test_bad_flags_exit_2(argv_tail, message, tmp_path, dist_file, capsys):
    assert run(["simulate", "--dist", str(dist_file), "--out", str(tmp_path / "x.csv"), *argv_tail]) == 2
    assert message in capsys.readouterr().err


def test_config_errors(tmp_path, dist_file, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["simulate", "--config", str(bad), "--dist", str(dist_file)]) == 2
    assert "line 1" in capsys.readouterr().err
    unknown = tmp_path / "unk.json"
    unknown.write_text(json.dumps({"stepz": 3}))
    assert run(["simulate", "--config", str(unknown), "--dist", str(dist_file)]) == 2
    assert "stepz" in capsys.readouterr().err
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"command": "dos"}))
    assert run(["simulate", "--config", str(wrong), "--dist", str(dist_file)]) == 2
    assert run(["simulate", "--out", str(tmp_path / "y.csv")]) == 2
    assert "dist" in capsys.readouterr().err
    bad_dist = tmp_path / "bd.json"
    bad_dist.write_text(json.dumps({"kind": "fixed", "coin": [[1, 0], [1, 0], [0, 0], [1, 0]]}))
    assert run(["simulate", "--dist", str(bad_dist)]) == 2
    assert run(["dos", "--dist", str(dist_file), "--n", "2"]) == 2
    assert run(["localize", "--dist", str(dist_file), "--distances", "5", "--horizon", "3"]) == 2


def test_runtime_error_exit_1(tmp_path, capsys):
    d = tmp_path / "flip.json"
    d.write_text(json.dumps({"kind": "fixed", "coin": "flip"}))
    assert run(["lyapunov", "--dist", str(d), "--seed", "0", "--grid", "2", "--chain-length", "10", "--out", str(tmp_path / "l.csv")]) == 1
    assert "FlipEncountered" in capsys.readouterr().err
    assert not (tmp_path / "l.csv").exists()


def test_threads_env_precedence(tmp_path, dist_file, monkeypatch):
    from locwalk import cli

    seen = {}
    original = cli._HANDLERS["localize"]

    def spy(cfg, workers):
        seen["workers"] = workers
        return original(cfg, workers)

    monkeypatch.setitem(cli._HANDLERS, "localize", spy)
    monkeypatch.setenv("LOCWALK_THREADS", "2")
    args = ["localize", "--dist", str(dist_file), "--seed", "1", "--distances", "1", "--horizon", "2", "--realizations", "2"]
    assert run([*args, "--workers", "5", "--out", str(tmp_path / "a.csv")]) == 0
    assert seen["workers"] == 2
    monkeypatch.delenv("LOCWALK_THREADS")
    assert run([*args, "--workers", "5", "--out", str(tmp_path / "b.csv")]) == 0
    assert seen["workers"] == 5
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_console_module_entry(tmp_path, dist_file):
    res = subprocess.run(
        [sys.executable, "-m", "locwalk.cli", "simulate", "--dist", str(dist_file), "--seed", "4", "--steps", "3", "--out", str(tmp_path / "m.csv")],
        capture_output=True,
        text=True,
        check=False,
    )
    assert res.returncode == 0, res.stderr
    assert "seed=4" in res.stdout


def test_check_example(tmp_path, dist_file):
    out = tmp_path / "r.json"
    assert run(["check", "--dist", str(dist_file), "--z", "0.25", "--seed", "1", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert set(rep["verdicts"]) == {"noncompact", "strongly_irreducible", "zeta_integrable"}


def test_localize_example(tmp_path, dist_file):
    args = ["localize", "--dist", str(dist_file), "--distances", "4,8,12", "--horizon", "200", "--realizations", "100", "--seed", "7"]
    assert run([*args, "--out", str(tmp_path / "a.csv")]) == 0
    assert run([*args, "--out", str(tmp_path / "b.csv")]) == 0
    text = (tmp_path / "a.csv").read_text()
    assert len(text.splitlines()) == 4
    assert text == (tmp_path / "b.csv").read_text()


@pytest.mark.slow
def test_thouless_example(tmp_path, dist_file):
    out = tmp_path / "t.csv"
    assert run(["thouless", "--dist", str(dist_file), "--n", "200", "--realizations", "50", "--z-abs", "1.05", "--seed", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "phase,gamma_direct,thouless_rhs,abs_diff"
    assert len(lines) == 9
    assert max(float(line.split(",")[3]) for line in lines[1:]) <= 0.05
