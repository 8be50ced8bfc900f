import json
import subprocess
import sys

import pytest

from dissnls.cli import _extract_dotted, main

SMALL_INI = """\
[grid]
points = 256

[plan]
stop_remaining = 0.1
snapshots_per_decade = 20
dt = 2e-4
adapt_c = 0.01

[run]
checks = mass_balance
checkpoint_every = 5
output_dir = {out}
"""


def write_cfg(tmp_path, name="small.ini", out="run"):
    path = tmp_path / name
    path.write_text(SMALL_INI.format(out=tmp_path / out))
    return path


def test_extract_dotted():
    rest, dotted = _extract_dotted(["run", "a.ini", "--plan.dt", "1e-4", "--model.b=2", "--slots", "2"])
    assert rest == ["run", "a.ini", "--slots", "2"]
    assert dotted == ["plan.dt=1e-4", "model.b=2"]


def test_describe_defaults(capsys):
    assert main(["describe-config"]) == 0
    out = capsys.readouterr().out
    assert "[model]" in out and "alpha = 1.8" in out
    assert "# config hash" in out and "b0            65536" in out


def test_describe_with_overrides(capsys):
    assert main(["describe-config", "--plan.stop_remaining", "1e-2", "--set", "model.alpha=1.7"]) == 0
    out = capsys.readouterr().out
    assert "stop_remaining = 0.01" in out and "alpha = 1.7" in out


def test_bad_key_exits_2(capsys):
    assert main(["describe-config", "--model.beta", "1"]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_run_and_resume(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["run", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "completed" in out and "[PASS] mass_balance" in out
    # a second run into the same directory is refused
    assert main(["run", str(cfg)]) == 2
    # resume of a finished run replays from its final checkpoint and still passes
    assert main(["resume", str(tmp_path / "run")]) == 0


def test_run_failure_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["run", str(cfg), "--initial.family", "gaussian"]) == 1
    assert "failed" in capsys.readouterr().out


def test_run_several_configs_in_parallel(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DISSNLS_WORKER_SLOTS", "2")
    a = write_cfg(tmp_path, "a.ini", "ra")
    b = write_cfg(tmp_path, "b.ini", "rb")
    assert main(["run", str(a), str(b)]) == 0
    assert (tmp_path / "ra" / "summary.json").exists() and (tmp_path / "rb" / "summary.json").exists()


def test_check_schedule_and_canary(tmp_path, capsys):
    assert main(["check", "--only", "11", "--json", str(tmp_path / "r.json")]) == 0
    assert "[PASS] 11" in capsys.readouterr().out
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep[0]["number"] == 11 and rep[0]["passed"]
    assert main(["check", "--only", "11", "--mutate-sigma"]) == 1
    assert "[FAIL] 11" in capsys.readouterr().out


def test_check_cheap_criteria(capsys):
    assert main(["check", "--only", "1,3"]) == 0
    out = capsys.readouterr().out
    assert "2/2 criteria passed" in out


@pytest.mark.slow
def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "dissnls", "describe-config"], capture_output=True, text=True)
    assert res.returncode == 0 and "[plan]" in res.stdout
