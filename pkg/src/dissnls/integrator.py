"""Strang splitting for the autonomous equation and its pseudo-conformal
(nonautonomous) counterpart

    v_t = i Lap v + lam (1 - b t)^{-(4 - N alpha)/2} |v|^alpha v.

The nonlinear part is integrated exactly, pointwise. The time-dependent
coefficient only enters through the effective time ``tau = int g(s) ds``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .params import ModelParams
from .spectral import Field, Grid, fft, free_propagate, ifft, l2_norm

log = logging.getLogger(__name__)

AUTONOMOUS = "autonomous"
NONAUTONOMOUS = "nonautonomous"
MAG_FLOOR = 1e-12


class IntegrationError(RuntimeError):
    """Raised when a run has to be aborted; ``time`` is the last good time."""

    def __init__(self, msg: str, time: float):
        super().__init__(f"{msg} (t = {time!r})")
        self.time = time


def nonlinear_flow(z0: np.ndarray, tau: float, lam: complex, alpha: float) -> np.ndarray:
    """Exact flow of z' = lam |z|^alpha z for time ``tau`` (array-valued)."""
    if lam.real > 0:
        raise OverflowError("Re lambda > 0 flows blow up in finite time; not supported")
    z0 = np.asarray(z0, dtype=complex)
    if tau == 0:
        return z0.copy()
    a = np.abs(z0) ** alpha
    x = -alpha * lam.real * a * tau  # >= 0
    log_d = np.log1p(x)
    # log1p(x)/x -> 1 as x -> 0 keeps the Re lam = 0 branch on the same formula
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(x > 1e-12, log_d / np.where(x > 0, x, 1.0), 1.0 - x / 2)
    phase = lam.imag * a * tau * ratio
    return z0 * np.exp(-log_d / alpha + 1j * phase)


def nonlinear_substep(f: Field, tau: float, p: ModelParams) -> Field:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return f.new(nonlinear_flow(f.values, tau, p.lam, p.alpha))


def time_weight(t: float, p: ModelParams) -> float:
    """g(t) = (1 - b t)^{-(4 - N alpha)/2}."""
    if p.b == 0:
        return 1.0
    return (1.0 - p.b * t) ** (-(4 - p.dim * p.alpha) / 2)


def effective_tau(t: float, dt: float, p: ModelParams) -> float:
    """Integral of g over [t, t + dt]."""
    if p.b == 0:
        return dt
    r0 = 1.0 - p.b * t
    if not p.b * dt < r0:
        raise ValueError(f"t + dt = {t + dt!r} reaches 1/b = {1 / p.b!r}")
    # log(r1/r0) without forming r1 = 1 - b(t + dt), which cancels for tiny dt
    return _tau_from_log(r0, math.log1p(-p.b * dt / r0), p)


def tau_between(r0: float, r1: float, p: ModelParams) -> float:
    """Integral of g between remaining fractions r0 = 1 - b t0 >= r1 = 1 - b t1 > 0."""
    d = (r1 - r0) / r0
    lr = math.log1p(d) if abs(d) < 0.5 else math.log(r1 / r0)
    return _tau_from_log(r0, lr, p)


def _tau_from_log(r0: float, lr: float, p: ModelParams) -> float:
    g = p.gap
    if g == 0:
        return -lr / p.b
    return r0 ** (-g) * math.expm1(-g * lr) / (p.b * g)


def ode_oracle(z0: complex, t: float, p: ModelParams) -> complex:
    """Closed-form solution of z' = lam g(t) |z|^alpha z."""
    return complex(nonlinear_flow(np.array([z0]), effective_tau(0.0, t, p), p.lam, p.alpha)[0])


def ode_limit_ratio(z0: complex, remaining: float, p: ModelParams) -> float:
    """(1-bt)^{-(2-N alpha)/2} |z(t)|^alpha divided by its limit, at 1 - b t = ``remaining``.

    Works directly with ``remaining`` so depths far below double-precision
    resolution of ``t`` remain reachable.
    """
    if p.b <= 0 or p.lambda_re >= 0 or p.gap <= 0:
        raise ValueError("limit needs b > 0, Re lambda < 0 and alpha < 2/N")
    tau = tau_between(1.0, remaining, p)
    inv = abs(z0) ** (-p.alpha) + p.alpha * abs(p.lambda_re) * tau
    return remaining ** (-p.gap) / inv / p.limit_constant()


@dataclass(frozen=True)
class StepPlan:
    equation: str = NONAUTONOMOUS
    dt: float = 1e-3
    t_end: float = 0.1
    adapt: bool = True
    snapshot_stride: int = 10
    adapt_c: float = 0.05
    snapshot_times: tuple[float, ...] = ()
    track_profile: bool = True

    def __post_init__(self):
        if self.equation not in (AUTONOMOUS, NONAUTONOMOUS):
            raise ValueError(f"unknown equation {self.equation!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if not 0 < self.adapt_c <= 0.1:
            raise ValueError("adapt_c must lie in (0, 0.1]")
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(s) for s in self.snapshot_times)))

    def check(self, p: ModelParams):
        if self.equation == NONAUTONOMOUS and p.b > 0 and not self.t_end < 1 / p.b:
            raise ValueError(f"t_end = {self.t_end} must precede 1/b = {1 / p.b}")

    def step_sizes(self, p: ModelParams, t0: float = 0.0) -> Iterator[tuple[float, float, bool]]:
        """Yield ``(t, dt, snapshot_after)``; the last step lands on ``t_end``."""
        self.check(p)
        t = t0
        marks = [s for s in self.snapshot_times if t0 < s < self.t_end]
        tol = 1e-13 * max(1.0, self.t_end)
        while self.t_end - t > tol:
            h = self.dt
            if self.adapt and self.equation == NONAUTONOMOUS and p.b > 0:
                h = min(h, self.adapt_c * (1.0 - p.b * t))
            forced = False
            if marks and marks[0] - t <= h + tol:
                h = marks[0] - t
                marks.pop(0)
                forced = True
            if self.t_end - t <= h + tol:
                h = self.t_end - t
                forced = True
            yield t, h, forced
            t = self.t_end if self.t_end - (t + h) <= tol else t + h


def strang_step(f: Field, t: float, dt: float, plan: StepPlan, p: ModelParams) -> Field:
    half = free_propagate(f, dt / 2)
    tau = effective_tau(t, dt, p) if plan.equation == NONAUTONOMOUS else dt
    mid = nonlinear_substep(half, tau, p)
    out = free_propagate(mid, dt / 2)
    return out.new(out.values, t + dt)


@dataclass
class Trajectory:
    params: ModelParams
    plan: StepPlan
    snapshots: list[Field] = field(default_factory=list)
    # running integral of |v|^{-alpha-1} L over [0, t]; f = -alpha |v0|^alpha * f_accum
    f_accum: np.ndarray | None = None
    # running integral of g(s) ||v(s)||_{alpha+2}^{alpha+2}
    dissipation_accum: float = 0.0
    f_history: list[np.ndarray] = field(default_factory=list)
    dissipation_history: list[float] = field(default_factory=list)
    boundary_history: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    mass0: float = 0.0

    @property
    def v0(self) -> Field:
        return self.snapshots[0]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def remaining(self) -> np.ndarray:
        """1 - b t at each snapshot (1 when b = 0)."""
        return 1.0 - self.params.b * self.times

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    def f_field(self, i: int = -1) -> np.ndarray:
        a = self.params.alpha
        return -a * np.abs(self.v0.values) ** a * self.f_history[i]

    def mass_ledger(self) -> np.ndarray:
        """Relative residual of ||v||^2 + 2|Re lam| D(t) - ||v0||^2 at each snapshot."""
        m = np.array([l2_norm(s) ** 2 for s in self.snapshots])
        d = np.array(self.dissipation_history)
        return np.abs(m + 2 * abs(self.params.lambda_re) * d - self.mass0) / self.mass0

    def l2_norms(self) -> np.ndarray:
        return np.array([l2_norm(s) for s in self.snapshots])

    def sup_norms(self, mask: np.ndarray | None = None) -> np.ndarray:
        return np.array([s.abs.max() if mask is None else s.abs[mask].max() for s in self.snapshots])


def compute_L_values(grid: Grid, v: np.ndarray, lap: np.ndarray) -> np.ndarray:
    """L = -Im(conj(v) Lap v) / |v|."""
    return -np.imag(np.conj(v) * lap) / np.abs(v)


@dataclass
class RunState:
    """Everything needed to continue a run from an intermediate time."""

    values: np.ndarray
    time: float
    v0: np.ndarray
    f_accum: np.ndarray
    dissipation_accum: float
    mass0: float


def run(
    v0: Field,
    plan: StepPlan,
    p: ModelParams,
    n_weight: int | None = None,
    resume: RunState | None = None,
    callback=None,
    damping: np.ndarray | None = None,
) -> Trajectory:
    """Advance ``v0`` to ``plan.t_end``.

    ``n_weight`` enables the theorem-mode precondition inf <x>^n |v0| > 0.
    ``callback(traj)`` is invoked after every stored snapshot.
    ``damping`` is an optional nonnegative rate profile gamma(x), applied as
    exp(-gamma h) inside the nonlinear substep (absorbing layer).
    """
    plan.check(p)
    grid = v0.grid
    inner = grid.inner_mask(0.5)
    lam, alpha = p.lam, p.alpha
    nonauto = plan.equation == NONAUTONOMOUS

    if n_weight is not None and not (grid.japanese**n_weight * v0.abs).min() > 0:
        raise ValueError("theorem mode: inf <x>^n |v0| must be positive")

    traj = Trajectory(params=p, plan=plan)
    if resume is None:
        v = np.array(v0.values)
        t = v0.time
        traj.mass0 = l2_norm(v0) ** 2
        f_int = np.zeros(grid.shape)
        diss = 0.0
        origin = v0
    else:
        v = np.array(resume.values, dtype=complex)
        t = resume.time
        traj.mass0 = resume.mass0
        f_int = np.array(resume.f_accum, dtype=float)
        diss = resume.dissipation_accum
        origin = Field(grid, resume.v0, 0.0)
    v0_abs = np.abs(origin.values)
    if plan.track_profile and v0_abs[inner].min() < MAG_FLOOR:
        raise IntegrationError("initial |v| below the magnitude floor on the inner half-domain", t)

    def dissipation_density(vals):
        return float(np.sum(np.abs(vals) ** (alpha + 2)) * grid.cell_volume)

    def f_integrand(vals, coeffs):
        lap = ifft(-grid.k2 * coeffs)
        absv = np.abs(vals)
        return -np.imag(np.conj(vals) * lap) * absv ** (-alpha - 2)

    def store(vals, time):
        traj.snapshots.append(Field(grid, vals, time))
        traj.f_history.append(f_int.copy())
        traj.dissipation_history.append(diss)
        traj.boundary_history.append(float(np.abs(vals[grid.outer_mask()]).max()))
        if callback is not None:
            callback(traj)

    traj.snapshots.append(origin)
    traj.f_history.append(np.zeros(grid.shape))
    traj.dissipation_history.append(0.0)
    traj.boundary_history.append(float(v0_abs[grid.outer_mask()].max()))
    if resume is not None:
        store(v, t)
    elif callback is not None:
        callback(traj)

    coeffs = fft(v)
    fi_prev = f_integrand(v, coeffs) if plan.track_profile else None
    P_prev = dissipation_density(v)
    prop_cache: dict[float, np.ndarray] = {}

    def half_prop(h):
        key = h / 2
        if key not in prop_cache:
            if len(prop_cache) > 8:
                prop_cache.clear()
            prop_cache[key] = np.exp(-1j * grid.k2 * key)
        return prop_cache[key]

    count = 0
    for t_k, h, forced in plan.step_sizes(p, t):
        P = half_prop(h)
        w = ifft(coeffs * P)
        tau = effective_tau(t_k, h, p) if nonauto else h
        w = nonlinear_flow(w, tau, lam, alpha)
        if damping is not None:
            w *= np.exp(-damping * h)
        coeffs = fft(w) * P
        v = ifft(coeffs)
        t_new = t_k + h
        if not np.all(np.isfinite(v)):
            raise IntegrationError("non-finite sample", t_k)
        if plan.track_profile:
            vmin = np.abs(v[inner]).min()
            if vmin < MAG_FLOOR:
                raise IntegrationError(f"min |v| = {vmin:.3e} on the inner half-domain", t_new)
            fi = f_integrand(v, coeffs)
            f_int += 0.5 * h * (fi_prev + fi)
            fi_prev = fi
        P_new = dissipation_density(v)
        # product trapezoid: the weight g is integrated exactly
        diss += 0.5 * (P_prev + P_new) * tau
        P_prev = P_new
        traj.steps.append(h)
        count += 1
        t = t_new
        if forced or count % plan.snapshot_stride == 0:
            store(v, t)
    if traj.snapshots[-1].time != t:
        store(v, t)
    traj.f_accum = f_int
    traj.dissipation_accum = diss
    log.debug("run finished: %d steps, t = %.6g", count, t)
    return traj


def state_of(traj: Trajectory) -> RunState:
    return RunState(
        values=np.array(traj.final.values),
        time=traj.final.time,
        v0=np.array(traj.v0.values),
        f_accum=np.array(traj.f_history[-1]),
        dissipation_accum=traj.dissipation_history[-1],
        mass0=traj.mass0,
    )
