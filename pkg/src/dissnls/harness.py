"""Experiment orchestration: INI configuration, initial-data families,
reproducible runs, row files, JSON summaries and binary checkpoints.

Run directory layout::

    config.ini       resolved configuration (output path included)
    rows.csv         one row per stored snapshot, appended as the run goes
    summary.json     status, checks, fits, thresholds, monitor maxima
    profile.npz      f0, omega0, |v0|^alpha (runs that reach the profile window)
    checkpoints/     ckpt_<index>.bin + ckpt_<index>.npz

Checkpoint ``.bin`` layout, all little-endian::

    offset  size  field
    0       4     magic b"DNLS"
    4       4     uint32 format version (1)
    8       4     uint32 dims N
    12      4     uint32 points per axis M
    16      8     float64 half-width L
    24      8     float64 time t
    32      8*M^N complex64 samples (float32 re, float32 im), C order

The ``.npz`` sidecar holds the float64 accumulators needed to resume.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import logging
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import checks as checks_mod
from . import profile as prof_mod
from .integrator import AUTONOMOUS, NONAUTONOMOUS, IntegrationError, RunState, StepPlan, Trajectory, run
from .params import IndexSet, ModelParams, sigma_schedule, thresholds, validate_indices
from .seminorms import MonitorStream, data_bound, seminorms
from .spectral import Field, Grid, l2_norm

log = logging.getLogger(__name__)

WORKER_SLOTS_ENV = "DISSNLS_WORKER_SLOTS"
CKPT_MAGIC = b"DNLS"
CKPT_VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")

DEFAULTS: dict[str, dict[str, str]] = {
    "model": {"lambda_re": "-1.0", "lambda_im": "0.0", "alpha": "1.8", "dim": "1", "b": "4.0", "K": "auto"},
    "indices": {"k": "auto", "n": "auto", "m": "auto", "J": "auto"},
    "grid": {"half_width": "20.0", "points": "2048"},
    "plan": {
        "equation": NONAUTONOMOUS,
        "dt": "5e-5",
        "adapt": "true",
        "adapt_c": "0.0025",
        "stop_remaining": "1e-3",
        "t_end": "auto",
        "snapshots_per_decade": "40",
        "snapshot_stride": "50",
        "track_profile": "auto",
    },
    "initial": {
        "family": "power",
        "c_re": "1.0",
        "c_im": "0.0",
        "decay": "auto",
        "eps": "0.5",
        "scale": "1.0",
        "modes": "6",
        "width": "1.0",
    },
    "run": {
        "seed": "0",
        "theorem_mode": "true",
        "output_dir": "runs/desk",
        "checks": "mass_balance, magnitude_identity, profile_error, sup_limit, l2_rate, profile_algebra",
        "checkpoint_every": "50",
    },
}

FAMILIES = ("power", "perturbed", "gaussian")


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _auto(conv):
    def parse(s: str):
        return "auto" if s.strip().lower() == "auto" else conv(s)

    return parse


def _names(s: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in s.replace("\n", ",").split(",") if x.strip())


PARSERS = {
    "model": {"lambda_re": float, "lambda_im": float, "alpha": float, "dim": int, "b": float, "K": _auto(float)},
    "indices": {k: _auto(int) for k in ("k", "n", "m", "J")},
    "grid": {"half_width": float, "points": int},
    "plan": {
        "equation": str,
        "dt": float,
        "adapt": _bool,
        "adapt_c": float,
        "stop_remaining": float,
        "t_end": _auto(float),
        "snapshots_per_decade": int,
        "snapshot_stride": int,
        "track_profile": _auto(_bool),
    },
    "initial": {
        "family": str,
        "c_re": float,
        "c_im": float,
        "decay": _auto(int),
        "eps": float,
        "scale": float,
        "modes": int,
        "width": float,
    },
    "run": {"seed": int, "theorem_mode": _bool, "output_dir": str, "checks": _names, "checkpoint_every": int},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InitialSpec:
    family: str = "power"
    c: complex = 1.0
    decay: int | str = "auto"
    eps: float = 0.5
    scale: float = 1.0
    modes: int = 6
    width: float = 1.0


@dataclass
class ExperimentConfig:
    """Typed view of the INI sections; ``values[section][key]``."""

    values: dict[str, dict]

    @classmethod
    def from_mapping(cls, raw: dict[str, dict[str, str]] | None = None, overrides: dict[str, str] | None = None):
        merged = {sec: dict(keys) for sec, keys in DEFAULTS.items()}
        for sec, keys in (raw or {}).items():
            if sec not in merged:
                raise ConfigError(f"unknown section [{sec}]")
            for k, v in keys.items():
                if k not in merged[sec]:
                    raise ConfigError(f"unknown key {sec}.{k}")
                merged[sec][k] = str(v)
        for dotted, v in (overrides or {}).items():
            sec, _, k = dotted.partition(".")
            if sec not in merged or k not in merged[sec]:
                raise ConfigError(f"unknown key {dotted}")
            merged[sec][k] = str(v)
        typed = {}
        for sec, keys in merged.items():
            typed[sec] = {}
            for k, v in keys.items():
                try:
                    typed[sec][k] = PARSERS[sec][k](v)
                except ValueError as exc:
                    raise ConfigError(f"{sec}.{k}: {exc}") from None
        cfg = cls(typed)
        cfg.validate()
        return cfg

    @classmethod
    def from_ini(cls, source: str | os.PathLike, overrides: dict[str, str] | None = None, text: bool = False):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keys are case sensitive (K, J)
        if text:
            cp.read_string(str(source))
        else:
            with open(source) as fh:
                cp.read_file(fh)
        raw = {sec: dict(cp[sec]) for sec in cp.sections()}
        return cls.from_mapping(raw, overrides)

    def validate(self):
        v = self.values
        unknown = [c for c in v["run"]["checks"] if c not in checks_mod.CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks: {', '.join(unknown)}")
        if v["initial"]["family"] not in FAMILIES:
            raise ConfigError(f"initial.family must be one of {FAMILIES}")
        if v["plan"]["equation"] not in (AUTONOMOUS, NONAUTONOMOUS):
            raise ConfigError("plan.equation must be 'autonomous' or 'nonautonomous'")
        if v["run"]["checkpoint_every"] < 1:
            raise ConfigError("run.checkpoint_every must be >= 1")
        try:
            self.model_params()
            self.grid()
            self.step_plan()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # -- typed accessors -------------------------------------------------

    def model_params(self, K: float | None = None) -> ModelParams:
        m = self.values["model"]
        if K is None:
            K = 1.0 if m["K"] == "auto" else m["K"]
        return ModelParams(m["lambda_re"], m["lambda_im"], m["alpha"], m["dim"], m["b"], K)

    def indices(self) -> IndexSet:
        d = IndexSet.default(self.values["model"]["dim"])
        got = {k: (getattr(d, k) if x == "auto" else x) for k, x in self.values["indices"].items()}
        return IndexSet(**got)

    def grid(self) -> Grid:
        g = self.values["grid"]
        return Grid(self.values["model"]["dim"], g["half_width"], g["points"])

    def initial(self) -> InitialSpec:
        s = self.values["initial"]
        return InitialSpec(s["family"], complex(s["c_re"], s["c_im"]), s["decay"], s["eps"], s["scale"], s["modes"], s["width"])

    @property
    def output_dir(self) -> Path:
        return Path(self.values["run"]["output_dir"])

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def theorem_mode(self) -> bool:
        return self.values["run"]["theorem_mode"]

    @property
    def checks(self) -> tuple[str, ...]:
        return self.values["run"]["checks"]

    def step_plan(self) -> StepPlan:
        pl = self.values["plan"]
        p = self.model_params()
        track = pl["track_profile"]
        if track == "auto":
            track = self.values["initial"]["family"] != "gaussian"
        common = dict(equation=pl["equation"], dt=pl["dt"], adapt=pl["adapt"], adapt_c=pl["adapt_c"], track_profile=track)
        if pl["equation"] == NONAUTONOMOUS and p.b > 0:
            stop = pl["stop_remaining"]
            if not 0 < stop < 1:
                raise ValueError("plan.stop_remaining must lie in (0, 1)")
            t_end = (1 - stop) / p.b if pl["t_end"] == "auto" else pl["t_end"]
            spd = pl["snapshots_per_decade"]
            if spd > 0:
                r_end = 1 - p.b * t_end
                count = int(math.ceil(math.log10(1 / r_end) * spd - 1e-9))
                r = 10.0 ** (-np.arange(1, count + 1) / spd)
                marks = tuple(float(x) for x in (1 - r[r > r_end * (1 + 1e-12)]) / p.b)
                return StepPlan(t_end=t_end, snapshot_stride=10**9, snapshot_times=marks, **common)
            return StepPlan(t_end=t_end, snapshot_stride=pl["snapshot_stride"], **common)
        if pl["t_end"] == "auto":
            raise ValueError("plan.t_end is required unless the equation is nonautonomous with b > 0")
        return StepPlan(t_end=pl["t_end"], snapshot_stride=pl["snapshot_stride"], **common)

    # -- serialization ----------------------------------------------------

    def canonical(self, include_output: bool = False) -> dict:
        out = {}
        for sec, keys in self.values.items():
            out[sec] = {}
            for k, v in keys.items():
                if sec == "run" and k == "output_dir" and not include_output:
                    continue
                out[sec][k] = list(v) if isinstance(v, tuple) else v
        return out

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for sec, keys in self.values.items():
            cp[sec] = {k: (", ".join(v) if isinstance(v, tuple) else (repr(v) if isinstance(v, float) else str(v))) for k, v in keys.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def with_overrides(self, **dotted) -> "ExperimentConfig":
        raw = {sec: {k: _unparse(v) for k, v in keys.items()} for sec, keys in self.values.items()}
        return ExperimentConfig.from_mapping(raw, {k.replace("__", "."): v for k, v in dotted.items()})


def _unparse(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- initial data ------------------------------------------------------------


def _bump(grid: Grid, modes: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded trigonometric polynomial q with |q| <= 1 (normalized by sum |a_j|)."""
    q = np.zeros(grid.shape, dtype=complex)
    amps = rng.standard_normal(modes) + 1j * rng.standard_normal(modes)
    waves = rng.integers(-modes, modes + 1, size=(modes, grid.dim))
    for a, j in zip(amps, waves):
        ph = sum(np.pi * jj / grid.half_width * c for jj, c in zip(j, grid.coords))
        q = q + a * np.exp(1j * ph)
    return q / np.abs(amps).sum()


def make_initial_data(spec: InitialSpec, grid: Grid, idx: IndexSet, seed: int = 0, theorem_mode: bool = False) -> tuple[Field, dict]:
    """Build v0 and report the data bound K of the regularity space."""
    n = idx.n if spec.decay == "auto" else int(spec.decay)
    jap = grid.japanese
    c = spec.c
    if spec.family == "gaussian":
        if theorem_mode:
            raise ConfigError("Gaussian data decay faster than any power: inf <x>^n |v0| = 0 in theorem mode")
        vals = c * np.exp(-grid.r2 / (2 * spec.width**2))
    elif spec.family == "power":
        if c == 0:
            raise ConfigError("c must be nonzero")
        vals = c * jap ** (-n)
    elif spec.family == "perturbed":
        if not 0 < spec.eps <= abs(c):
            raise ConfigError(f"eps = {spec.eps} must lie in (0, |c|] for the lower-bound margin")
        if not 0 <= spec.scale <= 1:
            raise ConfigError(f"perturbation scale {spec.scale} outside [0, 1] breaks |phi| <= (|c| - eps)<x>^-n")
        q = _bump(grid, spec.modes, np.random.default_rng(seed))
        vals = (c + spec.scale * (abs(c) - spec.eps) * q) * jap ** (-n)
    else:
        raise ConfigError(f"unknown family {spec.family!r}")
    v0 = Field(grid, vals, 0.0)
    inf_w = float((jap**idx.n * v0.abs).min())
    if spec.family == "perturbed" and n == idx.n and inf_w < spec.eps * (1 - 1e-12):
        raise ConfigError(f"perturbation violates the margin: inf <x>^n |v0| = {inf_w} < eps")
    if theorem_mode and not inf_w > 0:
        raise ConfigError("theorem mode needs inf <x>^n |v0| > 0")
    table = seminorms(v0, idx, warn=False)
    info = {"inf_weighted": inf_w, "x_norm": table.x_norm, "K_data": data_bound(table), "decay": n}
    return v0, info


# -- checkpoints -----------------------------------------------------------


def write_checkpoint(path: Path, f: Field, index: int, state: dict):
    g = f.grid
    header = _HEADER.pack(CKPT_MAGIC, CKPT_VERSION, g.dim, g.points, g.half_width, f.time)
    data = np.ascontiguousarray(f.values, dtype="<c8")
    with open(path.with_suffix(".bin"), "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())
    np.savez(path.with_suffix(".npz"), index=index, **state)


def read_checkpoint(path: Path) -> tuple[Field, dict]:
    raw = Path(path).with_suffix(".bin").read_bytes()
    magic, version, dim, points, L, t = _HEADER.unpack_from(raw)
    if magic != CKPT_MAGIC or version != CKPT_VERSION:
        raise ValueError(f"{path}: not a version-{CKPT_VERSION} checkpoint")
    grid = Grid(dim, L, points)
    expected = _HEADER.size + 8 * points**dim
    if len(raw) != expected:
        raise ValueError(f"{path}: size {len(raw)} != {expected}")
    vals = np.frombuffer(raw, dtype="<c8", offset=_HEADER.size).reshape(grid.shape).astype(complex)
    side = Path(path).with_suffix(".npz")
    state = {}
    if side.exists():
        with np.load(side) as z:
            state = {k: z[k] for k in z.files}
    return Field(grid, vals, t), state


def latest_checkpoint(run_dir: Path) -> Path | None:
    found = sorted((Path(run_dir) / "checkpoints").glob("ckpt_*.bin"))
    return found[-1].with_suffix("") if found else None


# -- rows ------------------------------------------------------------------

ROW_COLUMNS = (
    "index",
    "t",
    "remaining",
    "sup_norm",
    "l2_norm",
    "mass_residual",
    "identity_residual",
    "boundary_max",
    "spectral_tail",
    "x_norm",
    "inf_weighted",
    "fam1_max",
    "fam2_max",
    "fam3_max",
    "Psi_running",
    "bound_4K_ok",
    "decay_bound_ok",
)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17e}"


def read_rows(path: Path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    data = np.atleast_1d(data)
    return {name: np.asarray(data[name]) for name in data.dtype.names}


class _RowStream:
    def __init__(self, path: Path, traj_params: ModelParams, idx: IndexSet, monitor: MonitorStream | None, K: float, offset: int, after: float | None):
        self.path = path
        self.p = traj_params
        self.idx = idx
        self.monitor = monitor
        self.K = K
        self.offset = offset
        self.after = after
        self.identity_ok = traj_params.b > 0 and traj_params.lambda_re < 0 and traj_params.gap > 0
        self.written = 0
        self.last_psi = math.nan
        new = not path.exists()
        self.fh = open(path, "a", newline="")
        if new:
            self.fh.write(",".join(ROW_COLUMNS) + "\n")

    def __call__(self, traj: Trajectory):
        i = len(traj.snapshots) - 1
        snap = traj.snapshots[i]
        if self.after is not None and snap.time <= self.after:
            return
        p = self.p
        r = 1.0 - p.b * snap.time
        mass = l2_norm(snap) ** 2
        mres = abs(mass + 2 * abs(p.lambda_re) * traj.dissipation_history[i] - traj.mass0) / traj.mass0
        ires = math.nan
        if self.identity_ok and traj.plan.track_profile:
            ires = prof_mod.identity_residual_at(traj, i)
        fam = [math.nan] * 3
        tail = xn = infw = psi = math.nan
        b4 = dec = False
        if self.monitor is not None:
            try:
                tab, psi, dec = self.monitor.update(snap, r)
                tail, xn, infw = tab.tail, tab.x_norm, tab.inf_weighted
                fam = [max(tab.family(k).values()) if tab.family(k) else math.nan for k in (1, 2, 3)]
                b4 = psi <= 4 * self.K
            except ZeroDivisionError:
                self.monitor = None
        self.last_psi = psi
        row = [
            self.offset + i,
            snap.time,
            r,
            float(snap.abs.max()),
            math.sqrt(mass),
            mres,
            ires,
            traj.boundary_history[i],
            tail,
            xn,
            infw,
            *fam,
            psi,
            bool(b4),
            bool(dec),
        ]
        self.fh.write(",".join(_fmt(x) for x in row) + "\n")
        self.fh.flush()
        self.written += 1

    def close(self):
        self.fh.close()


# -- runs -------------------------------------------------------------------


@dataclass
class RunRecord:
    config_hash: str
    status: str
    output_dir: Path
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    error: str | None = None
    trajectory: Trajectory | None = None

    @property
    def passed(self) -> bool:
        return self.status == "completed" and all(c.passed for c in self.checks)

    def rows(self) -> dict[str, np.ndarray]:
        return read_rows(self.output_dir / "rows.csv")


class _Halt(Exception):
    pass


class _DirLock:
    def __init__(self, path: Path):
        self.path = path / ".lock"

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RuntimeError(f"{self.path.parent} is being written by another run") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return checks_mod._clean(x) if not isinstance(x, float) or math.isfinite(x) else None


def _prepare(cfg: ExperimentConfig):
    idx = cfg.indices()
    grid = cfg.grid()
    p = cfg.model_params()
    rep = validate_indices(p, idx, theorem_mode=cfg.theorem_mode)
    if cfg.theorem_mode:
        problems = p.theorem_violations() + rep.violations
        if problems:
            raise ConfigError("theorem mode: " + "; ".join(problems))
    v0, info = make_initial_data(cfg.initial(), grid, idx, cfg.seed, cfg.theorem_mode)
    K_spec = cfg.values["model"]["K"]
    if K_spec == "auto":
        K = max(1.0, info["K_data"]) if math.isfinite(info["K_data"]) else 1.0
    else:
        K = K_spec
        if cfg.theorem_mode and K < info["K_data"]:
            raise ConfigError(f"K = {K} below the data bound {info['K_data']:.6g}")
    p = cfg.model_params(K)
    return p, idx, v0, info, rep


def _base_summary(cfg, p, idx, info, rep) -> dict:
    summary = {
        "config_hash": cfg.config_hash,
        "params": asdict(p),
        "indices": asdict(idx),
        "initial": info,
        "index_violations": rep.violations,
    }
    if p.lambda_re != 0:
        th = thresholds(p, idx)
        summary["thresholds"] = {
            "alpha1": th.alpha1,
            "alpha1_gap": th.alpha1_gap,
            "b0": th.b0,
            "b1": th.b1,
            "theorem_regime": th.theorem_regime,
            "notes": list(th.notes),
        }
    return summary


def run_experiment(cfg: ExperimentConfig, halt_after: int | None = None, resume: bool = False) -> RunRecord:
    """Execute one configured run and write its directory.

    ``halt_after`` stops after that many stored snapshots (status
    ``interrupted``), leaving checkpoints for :func:`resume_experiment`.
    """
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if not resume and (out / "rows.csv").exists():
        raise FileExistsError(f"{out} already holds a run; use resume")
    with _DirLock(out):
        return _execute(cfg, out, halt_after, resume)


def _execute(cfg: ExperimentConfig, out: Path, halt_after: int | None, resume: bool) -> RunRecord:
    record = RunRecord(cfg.config_hash, "failed", out)
    try:
        p, idx, v0, info, rep = _prepare(cfg)
    except (ValueError, ArithmeticError) as exc:
        record.error = str(exc)
        record.summary = {"config_hash": cfg.config_hash, "status": "failed", "error": str(exc)}
        _write_summary(out, record.summary)
        return record
    summary = _base_summary(cfg, p, idx, info, rep)
    (out / "config.ini").write_text(cfg.to_ini())
    plan = cfg.step_plan()
    ck_dir = out / "checkpoints"
    ck_dir.mkdir(exist_ok=True)
    every = cfg.values["run"]["checkpoint_every"]

    state = None
    offset, after, phi0 = 0, None, None
    if resume:
        ck = latest_checkpoint(out)
        if ck is None:
            raise FileNotFoundError(f"no checkpoint under {out}")
        fck, side = read_checkpoint(ck)
        if fck.grid != v0.grid:
            raise ValueError("checkpoint grid does not match the configuration")
        state = RunState(
            values=fck.values,
            time=fck.time,
            v0=side["v0"],
            f_accum=side["f_accum"],
            dissipation_accum=float(side["dissipation_accum"]),
            mass0=float(side["mass0"]),
        )
        offset = int(side["index"]) - 1
        phi0 = [float(x) for x in side["phi"]] if "phi" in side else None
        rows_path = out / "rows.csv"
        after = float(read_rows(rows_path)["t"][-1]) if rows_path.exists() else fck.time
        summary["resumed_from"] = {"checkpoint": ck.name, "t": fck.time}

    monitor = None
    try:
        monitor = MonitorStream(p, sigma_schedule(p, idx), idx, phi0)
    except ValueError:
        pass  # invalid indices outside theorem mode: no monitors
    rows = _RowStream(out / "rows.csv", p, idx, monitor, p.K, offset, after)

    def on_snapshot(traj: Trajectory):
        rows(traj)
        k = offset + len(traj.snapshots) - 1
        if k > 0 and k % every == 0:
            _checkpoint(ck_dir, traj, k, rows)
        if halt_after is not None and k >= halt_after:
            raise _Halt()

    traj = None
    try:
        traj = run(v0, plan, p, resume=state, callback=on_snapshot)
        _checkpoint(ck_dir, traj, offset + len(traj.snapshots) - 1, rows)
        record.status = "completed"
    except _Halt:
        record.status = "interrupted"
    except (IntegrationError, ValueError, FloatingPointError, ArithmeticError) as exc:
        record.error = f"{type(exc).__name__}: {exc}"
        log.error("run failed: %s", record.error)
    finally:
        rows.close()

    summary["status"] = record.status
    summary["error"] = record.error
    if traj is not None and record.status == "completed":
        record.trajectory = traj
        summary["steps"] = len(traj.steps)
        summary["t_final"] = traj.final.time
        summary["remaining_final"] = 1 - p.b * traj.final.time
        record.checks = checks_mod.run_checks(traj, idx, cfg.checks)
        try:
            prof = prof_mod.build_profiles(traj, n=idx.n)
            np.savez(out / "profile.npz", f0=prof.f0, omega0=prof.omega0, v0_mag_alpha=prof.v0_mag_alpha, t_final=prof.t_final)
        except ValueError:
            pass
        if monitor is not None:
            summary["monitors"] = {
                "Phi": monitor.phi,
                "PsiT": max(monitor.phi),
                "K": p.K,
                "bound_4K_ok": max(monitor.phi) <= 4 * p.K,
            }
    summary["checks"] = [c.as_dict() for c in record.checks]
    summary["all_passed"] = record.passed
    record.summary = _json_safe(summary)
    _write_summary(out, record.summary)
    return record


def _checkpoint(ck_dir: Path, traj: Trajectory, k: int, rows: _RowStream):
    phi = rows.monitor.phi if rows.monitor is not None else [math.nan] * 4
    write_checkpoint(
        ck_dir / f"ckpt_{k:06d}",
        traj.final,
        k,
        {
            "v0": traj.v0.values,
            "f_accum": traj.f_history[-1],
            "dissipation_accum": traj.dissipation_history[-1],
            "mass0": traj.mass0,
            "phi": np.array(phi),
        },
    )


def _write_summary(out: Path, summary: dict):
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def resume_experiment(run_dir: str | os.PathLike, overrides: dict[str, str] | None = None) -> RunRecord:
    run_dir = Path(run_dir)
    cfg = ExperimentConfig.from_ini(run_dir / "config.ini", overrides)
    if cfg.output_dir.resolve() != run_dir.resolve():
        cfg = cfg.with_overrides(**{"run.output_dir": str(run_dir)})
    return run_experiment(cfg, resume=True)


def worker_slots() -> int:
    raw = os.environ.get(WORKER_SLOTS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKER_SLOTS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _run_one(cfg: ExperimentConfig) -> tuple[str, bool, str | None]:
    rec = run_experiment(cfg)
    return str(rec.output_dir), rec.passed, rec.error


def run_many(cfgs: list[ExperimentConfig], slots: int | None = None) -> list[tuple[str, bool, str | None]]:
    """Run independent experiments, ``slots`` at a time (default from the environment)."""
    dirs = [c.output_dir.resolve() for c in cfgs]
    if len(set(dirs)) != len(dirs):
        raise ConfigError("each run needs its own output directory")
    slots = worker_slots() if slots is None else slots
    if slots == 1 or len(cfgs) == 1:
        return [_run_one(c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=slots) as pool:
        return list(pool.map(_run_one, cfgs))
