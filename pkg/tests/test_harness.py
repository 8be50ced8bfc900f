import json
import struct

import numpy as np
import pytest

from dissnls.harness import (
    CKPT_MAGIC,
    ROW_COLUMNS,
    WORKER_SLOTS_ENV,
    ConfigError,
    ExperimentConfig,
    InitialSpec,
    latest_checkpoint,
    make_initial_data,
    read_checkpoint,
    read_rows,
    resume_experiment,
    run_experiment,
    run_many,
    worker_slots,
    write_checkpoint,
)
from dissnls.params import IndexSet
from dissnls.spectral import Field, Grid

SMALL = {
    "grid.points": "256",
    "plan.stop_remaining": "0.1",
    "plan.snapshots_per_decade": "20",
    "plan.dt": "2e-4",
    "plan.adapt_c": "0.01",
    "run.checks": "mass_balance",
    "run.checkpoint_every": "5",
}


def small(tmp_path, name="run", **extra):
    ov = dict(SMALL, **{"run.output_dir": str(tmp_path / name)})
    ov.update({k.replace("__", "."): v for k, v in extra.items()})
    return ExperimentConfig.from_mapping(overrides=ov)


def test_defaults_describe_the_desk_problem():
    cfg = ExperimentConfig.from_mapping()
    p = cfg.model_params()
    assert (p.lambda_re, p.lambda_im, p.alpha, p.dim, p.b) == (-1.0, 0.0, 1.8, 1, 4.0)
    assert cfg.grid() == Grid(1, 20.0, 2048)
    plan = cfg.step_plan()
    assert 1 - p.b * plan.t_end == pytest.approx(1e-3, rel=1e-9)
    assert len(plan.snapshot_times) == 119
    assert cfg.theorem_mode and cfg.initial().family == "power"


def test_unknown_entries_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"modle": {"b": "1"}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"model": {"beta": "1"}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(overrides={"run.checks": "mass_balance, telepathy"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(overrides={"grid.points": "lots"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(overrides={"plan.stop_remaining": "1.5"})


def test_ini_round_trip_and_case_sensitive_keys():
    text = "[model]\nK = 7.5\nb = 2.0\n[indices]\nJ = 10\n"
    cfg = ExperimentConfig.from_ini(text, text=True)
    assert cfg.values["model"]["K"] == 7.5 and cfg.indices().J == 10
    again = ExperimentConfig.from_ini(cfg.to_ini(), text=True)
    assert again.config_hash == cfg.config_hash


def test_hash_ignores_order_and_output_dir():
    a = ExperimentConfig.from_ini("[model]\nb = 2.0\n[grid]\npoints = 512\n", text=True)
    b = ExperimentConfig.from_ini("[grid]\npoints = 512\n[model]\nb = 2.0\n", text=True)
    assert a.config_hash == b.config_hash
    assert a.with_overrides(**{"run.output_dir": "elsewhere"}).config_hash == a.config_hash
    assert a.with_overrides(**{"model.b": "3.0"}).config_hash != a.config_hash


def test_power_data_lower_bound_is_one():
    idx = IndexSet.default(1)
    v0, info = make_initial_data(InitialSpec(), Grid(1, 20.0, 512), idx, theorem_mode=True)
    assert info["inf_weighted"] == pytest.approx(1.0, abs=1e-14)
    assert info["decay"] == idx.n


def test_perturbed_data_keep_margin():
    idx = IndexSet.default(1)
    for seed in range(5):
        _, info = make_initial_data(InitialSpec("perturbed", eps=0.5), Grid(1, 20.0, 512), idx, seed=seed, theorem_mode=True)
        assert info["inf_weighted"] >= 0.5


def test_initial_data_rejections():
    idx = IndexSet.default(1)
    g = Grid(1, 20.0, 256)
    with pytest.raises(ConfigError):
        make_initial_data(InitialSpec("gaussian"), g, idx, theorem_mode=True)
    with pytest.raises(ConfigError):
        make_initial_data(InitialSpec("perturbed", eps=2.0), g, idx)
    with pytest.raises(ConfigError):
        make_initial_data(InitialSpec("perturbed", scale=1.5), g, idx)
    with pytest.raises(ConfigError):
        make_initial_data(InitialSpec(c=0), g, idx)
    v0, info = make_initial_data(InitialSpec("gaussian"), g, idx, theorem_mode=False)
    assert info["inf_weighted"] < 1e-30


def test_checkpoint_byte_layout(tmp_path):
    g = Grid(1, 12.5, 64)
    vals = np.exp(1j * g.axis) / (1 + g.axis**2)
    write_checkpoint(tmp_path / "ckpt_000007", Field(g, vals, 0.125), 7, {"mass0": 2.0})
    raw = (tmp_path / "ckpt_000007.bin").read_bytes()
    assert len(raw) == 32 + 8 * 64
    assert struct.unpack_from("<4sIIIdd", raw) == (CKPT_MAGIC, 1, 1, 64, 12.5, 0.125)
    data = np.frombuffer(raw[32:], dtype="<c8")
    assert np.array_equal(data, vals.astype(np.complex64))
    f, side = read_checkpoint(tmp_path / "ckpt_000007")
    assert f.grid == g and f.time == 0.125
    assert np.abs(f.values - vals).max() < 1e-7
    assert int(side["index"]) == 7 and float(side["mass0"]) == 2.0
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        read_checkpoint(tmp_path / "bad")


def test_run_directory_contents(tmp_path):
    rec = run_experiment(small(tmp_path))
    assert rec.status == "completed" and rec.passed
    out = rec.output_dir
    for name in ("config.ini", "rows.csv", "summary.json"):
        assert (out / name).exists()
    # profiles need a run that gets within 1e-2 of the endpoint
    assert not (out / "profile.npz").exists()
    rows = rec.rows()
    assert tuple(rows) == ROW_COLUMNS
    assert rows["t"][0] == 0.0 and np.all(np.diff(rows["t"]) > 0)
    assert rows["remaining"][-1] == pytest.approx(0.1, rel=1e-9)
    assert np.all(rows["index"] == np.arange(rows["t"].size))
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "completed" and summary["all_passed"]
    assert summary["config_hash"] == rec.config_hash
    assert "wall" not in json.dumps(summary)
    assert latest_checkpoint(out) is not None
    assert not (out / ".lock").exists()


def test_refuses_to_overwrite(tmp_path):
    cfg = small(tmp_path)
    run_experiment(cfg)
    with pytest.raises(FileExistsError):
        run_experiment(cfg)


def test_directory_lock(tmp_path):
    cfg = small(tmp_path)
    cfg.output_dir.mkdir(parents=True)
    (cfg.output_dir / ".lock").write_text("123")
    with pytest.raises(RuntimeError):
        run_experiment(cfg)


def test_determinism(tmp_path):
    a = run_experiment(small(tmp_path, "a"))
    b = run_experiment(small(tmp_path, "b"))
    assert (a.output_dir / "rows.csv").read_bytes() == (b.output_dir / "rows.csv").read_bytes()


def test_failure_record(tmp_path):
    # Gaussian data in theorem mode are rejected before any step
    rec = run_experiment(small(tmp_path, initial__family="gaussian"))
    assert rec.status == "failed" and not rec.passed
    summary = json.loads((rec.output_dir / "summary.json").read_text())
    assert summary["status"] == "failed" and "Gaussian" in summary["error"]


def test_integration_failure_is_recorded(tmp_path):
    rec = run_experiment(small(tmp_path, initial__family="gaussian", run__theorem_mode="false", plan__track_profile="true"))
    assert rec.status == "failed"
    assert rec.error.startswith("IntegrationError")


def test_conservative_mass_check(tmp_path):
    rec = run_experiment(
        small(tmp_path, model__lambda_re="0.0", model__lambda_im="-1.0", model__b="0.0", plan__equation="autonomous",
              plan__t_end="0.2", plan__dt="1e-3", run__theorem_mode="false", plan__track_profile="false")
    )
    assert rec.status == "completed"
    (mass,) = rec.checks
    assert mass.name == "mass_balance" and mass.passed and mass.threshold == 1e-8


def test_halt_and_resume(tmp_path):
    full = run_experiment(small(tmp_path, "full"))
    part = run_experiment(small(tmp_path, "part"), halt_after=12)
    assert part.status == "interrupted"
    assert read_rows(part.output_dir / "rows.csv")["t"].size == 13
    rec = resume_experiment(part.output_dir)
    assert rec.status == "completed" and rec.passed
    a, b = full.rows(), rec.rows()
    assert np.array_equal(a["index"], b["index"])
    assert np.allclose(a["t"], b["t"], rtol=1e-12, atol=0)
    # complex64 checkpoint data: agreement to single precision, not bitwise
    assert np.abs(a["sup_norm"] - b["sup_norm"]).max() < 1e-6
    summary = json.loads((rec.output_dir / "summary.json").read_text())
    assert summary["resumed_from"]["checkpoint"] == "ckpt_000010"


def test_resume_without_checkpoint(tmp_path):
    cfg = small(tmp_path)
    cfg.output_dir.mkdir(parents=True)
    (cfg.output_dir / "config.ini").write_text(cfg.to_ini())
    with pytest.raises(FileNotFoundError):
        resume_experiment(cfg.output_dir)


def test_worker_slots_env(monkeypatch):
    monkeypatch.delenv(WORKER_SLOTS_ENV, raising=False)
    assert worker_slots() == 1
    monkeypatch.setenv(WORKER_SLOTS_ENV, "3")
    assert worker_slots() == 3
    monkeypatch.setenv(WORKER_SLOTS_ENV, "0")
    assert worker_slots() == 1
    monkeypatch.setenv(WORKER_SLOTS_ENV, "many")
    with pytest.raises(ConfigError):
        worker_slots()


def test_run_many_parallel(tmp_path):
    cfgs = [small(tmp_path, "p0"), small(tmp_path, "p1", initial__family="perturbed", run__seed="4")]
    res = run_many(cfgs, slots=2)
    assert [r[1] for r in res] == [True, True]
    with pytest.raises(ConfigError):
        run_many([cfgs[0], cfgs[0]], slots=2)
