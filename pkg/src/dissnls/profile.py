"""Asymptotic profile of the nonautonomous flow as t -> 1/b: the correction
field f, the exact magnitude identity, the decomposition v = omega psi e^{i theta},
and the decay-law checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .integrator import MAG_FLOOR, Trajectory
from .params import IndexSet, ModelParams
from .spectral import Field, Grid, l2_norm, laplacian_values, resample


def compute_L(v: Field) -> np.ndarray:
    """L = -Im(conj(v) Lap v) / |v|."""
    absv = v.abs
    if absv.min() < MAG_FLOOR:
        raise ValueError(f"min |v| = {absv.min():.3e} below the floor {MAG_FLOOR}")
    lap = laplacian_values(v.grid, v.values)
    return -np.imag(np.conj(v.values) * lap) / absv


def _dissipation_coefficient(p: ModelParams) -> float:
    """2 alpha |Re lam| / (b (2 - N alpha))."""
    return 2 * p.alpha * abs(p.lambda_re) / (p.b * (2 - p.dim * p.alpha))


def _growth(remaining, p: ModelParams):
    """(1 - b t)^{-(2 - N alpha)/2} - 1, accurate for remaining near 1."""
    return np.expm1(-p.gap * np.log(remaining))


def _require_dissipative(p: ModelParams):
    if p.b <= 0:
        raise ValueError("the magnitude identity needs b > 0")
    if not p.lambda_re < 0:
        raise ValueError("the magnitude identity needs Re lambda < 0")
    if not p.gap > 0:
        raise ValueError("alpha = 2/N is excluded")


def identity_residual_at(traj: Trajectory, i: int, fraction: float = 0.5) -> float:
    """Relative residual of the closed-form expression for |v|^alpha at snapshot ``i``."""
    p = traj.params
    a = p.alpha
    inner = traj.v0.grid.inner_mask(fraction)
    v0a = np.abs(traj.v0.values[inner]) ** a
    f = traj.f_field(i)[inner]
    r = 1.0 - p.b * traj.snapshots[i].time
    pred = v0a / (1 + f + _dissipation_coefficient(p) * v0a * _growth(r, p))
    return float(np.max(np.abs(np.abs(traj.snapshots[i].values[inner]) ** a - pred) / v0a))


def magnitude_identity_residual(traj: Trajectory, fraction: float = 0.5) -> np.ndarray:
    """Per-snapshot relative residual of the closed-form expression for |v|^alpha."""
    _require_dissipative(traj.params)
    if not traj.f_history or not traj.plan.track_profile:
        raise ValueError("trajectory was run without the f quadrature")
    return np.array([identity_residual_at(traj, i, fraction) for i in range(len(traj.snapshots))])


@dataclass
class FitResult:
    exponent: float
    prefactor: float
    r2: float
    window: tuple[float, float]
    npoints: int = 0


def fit_power_law(x, y, window: tuple[float, float] | None = None) -> FitResult:
    """Least-squares fit y ~ C x^p on log-log data restricted to ``window`` (lo, hi)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if window is not None:
        lo, hi = window
        keep &= (x >= lo * (1 - 1e-9)) & (x <= hi * (1 + 1e-9))
    if keep.sum() < 3:
        raise ValueError(f"only {keep.sum()} points in the fit window")
    lr = stats.linregress(np.log(x[keep]), np.log(y[keep]))
    win = (float(x[keep].min()), float(x[keep].max()))
    return FitResult(float(lr.slope), float(math.exp(lr.intercept)), float(lr.rvalue**2), win, int(keep.sum()))


def last_decade(traj: Trajectory) -> tuple[float, float]:
    r_end = float(traj.remaining[-1])
    return (r_end, 10 * r_end)


@dataclass
class ProfileSet:
    params: ModelParams
    grid: Grid
    f0: np.ndarray
    omega0: np.ndarray
    v0_mag_alpha: np.ndarray
    t_final: float
    omega_drift: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def _bracket(self, remaining):
        p = self.params
        return 1 + self.f0 + _dissipation_coefficient(p) * self.v0_mag_alpha * _growth(remaining, p)

    def psi(self, t: float) -> np.ndarray:
        r = 1.0 - self.params.b * t
        return ((1 + self.f0) / self._bracket(r)) ** (1 / self.params.alpha)

    def theta(self, t: float) -> np.ndarray:
        p = self.params
        return (p.lambda_im / p.lambda_re) * np.log(self.psi(t))

    def omega(self, v: Field) -> np.ndarray:
        """omega(t) = v e^{-i theta} / psi at the time of ``v``."""
        return v.values * np.exp(-1j * self.theta(v.time)) / self.psi(v.time)

    def profile_field(self, t: float) -> Field:
        """omega0 psi(t) e^{i theta(t)}."""
        return Field(self.grid, self.omega0 * self.psi(t) * np.exp(1j * self.theta(t)), t)

    def Psi(self, t_u: float, y_f0: np.ndarray, y_v0a: np.ndarray) -> np.ndarray:
        """Physical-time amplitude factor, written with (1 + b t)^{(2 - N alpha)/2} - 1."""
        p = self.params
        grow = np.expm1(p.gap * math.log1p(p.b * t_u))
        return ((1 + y_f0) / (1 + y_f0 + _dissipation_coefficient(p) * y_v0a * grow)) ** (1 / p.alpha)


def build_profiles(traj: Trajectory, p: ModelParams | None = None, fraction: float = 0.5, n: int | None = None) -> ProfileSet:
    p = p or traj.params
    _require_dissipative(p)
    if traj.remaining[-1] > 1e-2 * (1 + 1e-9):
        raise ValueError(f"trajectory stops at 1 - bt = {traj.remaining[-1]:.3g}; need <= 1e-2")
    f0 = traj.f_field(-1)
    if (1 + f0).min() <= 0:
        raise ValueError("1 + f0 <= 0 somewhere: profile undefined")
    grid = traj.v0.grid
    prof = ProfileSet(
        params=p,
        grid=grid,
        f0=f0,
        omega0=np.zeros(grid.shape, dtype=complex),
        v0_mag_alpha=np.abs(traj.v0.values) ** p.alpha,
        t_final=traj.final.time,
    )
    prof.omega0 = prof.omega(traj.final)
    inner = grid.inner_mask(fraction)
    w = grid.japanese[inner] ** (n if n is not None else 0)
    prof.omega_drift = np.array(
        [float(np.max(w * np.abs(prof.omega(s)[inner] - prof.omega0[inner]))) for s in traj.snapshots]
    )
    return prof


def profile_error(traj: Trajectory, prof: ProfileSet, idx: IndexSet, fraction: float = 0.5) -> np.ndarray:
    """sup over the inner region of <x>^n |v - omega0 psi e^{i theta}| per snapshot."""
    inner = prof.grid.inner_mask(fraction)
    w = prof.grid.japanese[inner] ** idx.n
    out = []
    for s in traj.snapshots:
        out.append(float(np.max(w * np.abs(s.values[inner] - prof.profile_field(s.time).values[inner]))))
    return np.array(out)


def profile_error_fit(
    traj: Trajectory, prof: ProfileSet, idx: IndexSet, window: tuple[float, float] = (2e-3, 1e-2)
) -> tuple[np.ndarray, FitResult]:
    e = profile_error(traj, prof, idx)
    r = traj.remaining
    keep = np.arange(len(r)) < len(r) - 1  # final snapshot matches by construction
    return e, fit_power_law(r[keep], e[keep], window)


@dataclass
class LimitCheck:
    target: float
    deviation: float  # at the final snapshot
    remaining: np.ndarray
    deviations: np.ndarray  # over the last decade
    trend: FitResult | None

    @property
    def decreasing(self) -> bool:
        """Deviation shrinks as 1 - bt decreases through the last decade."""
        d = self.deviations
        return bool(d.size >= 2 and d[-1] < d[0] and (self.trend is None or self.trend.exponent > 0))


def sup_limit_check(traj: Trajectory, p: ModelParams | None = None) -> LimitCheck:
    p = p or traj.params
    _require_dissipative(p)
    target = p.limit_constant()
    r = traj.remaining
    sup = traj.sup_norms()
    scaled = r ** (-p.gap) * sup**p.alpha
    dev = np.abs(scaled - target) / target
    lo, hi = last_decade(traj)
    keep = (r >= lo) & (r <= hi * (1 + 1e-9))
    trend = None
    if keep.sum() >= 3:
        trend = fit_power_law(r[keep], dev[keep])
    return LimitCheck(target, float(dev[-1]), r[keep], dev[keep], trend)


def l2_target_exponent(p: ModelParams, n: int) -> float:
    return (1 / p.alpha - p.dim / 2) * (1 - p.dim / (2 * n))


@dataclass
class L2RateCheck:
    target: float
    fit: FitResult
    profile_fit: FitResult

    @property
    def relative_error(self) -> float:
        return abs(self.fit.exponent - self.target) / self.target

    @property
    def route_gap(self) -> float:
        return abs(self.fit.exponent - self.profile_fit.exponent)


def l2_rate_check(traj: Trajectory, p: ModelParams | None = None, idx: IndexSet | None = None, prof: ProfileSet | None = None) -> L2RateCheck:
    """Fit ||v(t)||_2 ~ C (1-bt)^p over the last decade; the second route
    integrates |omega0 psi(t)|^2 from the closed-form profile."""
    p = p or traj.params
    if idx is None:
        idx = IndexSet.default(p.dim)
    prof = prof or build_profiles(traj, p)
    r = traj.remaining
    window = last_decade(traj)
    fit = fit_power_law(r, traj.l2_norms(), window)
    prof_norms = np.array([l2_norm(prof.omega0 * prof.psi(t), prof.grid) for t in traj.times])
    pfit = fit_power_law(r, prof_norms, window)
    return L2RateCheck(l2_target_exponent(p, idx.n), fit, pfit)


def physical_profile_z(prof: ProfileSet, p: ModelParams, t: float, target: Grid) -> Field:
    """z(t, x) = (1+bt)^{-N/2} e^{i Theta} Psi(t, x/(1+bt)) omega0(x/(1+bt)).

    Theta = b|x|^2 / (4(1+bt)) + (Im lam / Re lam) log Psi, the phase carried
    over from theta through the pseudo-conformal map.
    """
    g = prof.grid
    s = 1.0 + p.b * t
    scale = 1.0 / s
    if not target.guard_chirp(p.b / (4 * s)):
        raise ValueError("target grid under-resolves the quadratic phase")
    om = resample(Field(g, prof.omega0), scale, target).values
    f0 = resample(Field(g, prof.f0), scale, target).values.real
    v0a = resample(Field(g, prof.v0_mag_alpha), scale, target).values.real
    Psi = prof.Psi(t, f0, v0a)
    Theta = p.b * target.r2 / (4 * s) + (p.lambda_im / p.lambda_re) * np.log(Psi)
    return Field(target, s ** (-p.dim / 2) * np.exp(1j * Theta) * Psi * om, t)
