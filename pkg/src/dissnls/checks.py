"""Named pass/fail checks evaluated on a finished trajectory."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import profile as prof_mod
from .integrator import Trajectory
from .params import IndexSet

MASS_TOL = 1e-6
MASS_TOL_CONSERVATIVE = 1e-8
IDENTITY_TOL = 1e-3
PROFILE_ERROR_MIN_EXPONENT = 0.4
PROFILE_ERROR_WINDOW = (2e-3, 1e-2)
SUP_LIMIT_TOL = 0.15
L2_RATE_REL_TOL = 0.30
L2_ROUTE_TOL = 0.005
ALGEBRA_TOL = 1e-12
OMEGA0_TOL = 1e-2


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: str = ""
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": _clean(self.value),
            "threshold": _clean(self.threshold),
            "detail": self.detail,
            **{k: _clean(v) for k, v in self.extra.items()},
        }


def _clean(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


class CheckContext:
    """Lazily builds the profile set shared by several checks."""

    def __init__(self, traj: Trajectory, idx: IndexSet):
        self.traj = traj
        self.idx = idx
        self._prof = None

    @property
    def params(self):
        return self.traj.params

    @property
    def prof(self) -> prof_mod.ProfileSet:
        if self._prof is None:
            self._prof = prof_mod.build_profiles(self.traj, n=self.idx.n)
        return self._prof


def mass_balance(ctx: CheckContext) -> CheckResult:
    res = ctx.traj.mass_ledger()
    tol = MASS_TOL_CONSERVATIVE if ctx.params.lambda_re == 0 else MASS_TOL
    worst = float(res.max())
    return CheckResult("mass_balance", worst < tol, worst, tol, "max relative ledger residual over snapshots")


def magnitude_identity(ctx: CheckContext) -> CheckResult:
    res = prof_mod.magnitude_identity_residual(ctx.traj)
    worst = float(res.max())
    return CheckResult("magnitude_identity", worst < IDENTITY_TOL, worst, IDENTITY_TOL, "max over snapshots, inner half-domain")


def profile_error(ctx: CheckContext) -> CheckResult:
    _, fit = prof_mod.profile_error_fit(ctx.traj, ctx.prof, ctx.idx, PROFILE_ERROR_WINDOW)
    return CheckResult(
        "profile_error",
        fit.exponent >= PROFILE_ERROR_MIN_EXPONENT,
        fit.exponent,
        PROFILE_ERROR_MIN_EXPONENT,
        f"fitted exponent over 1-bt in [{fit.window[0]:.3g}, {fit.window[1]:.3g}], r2={fit.r2:.4f}",
        {"prefactor": fit.prefactor, "points": fit.npoints},
    )


def sup_limit(ctx: CheckContext) -> CheckResult:
    lc = prof_mod.sup_limit_check(ctx.traj)
    ok = lc.deviation < SUP_LIMIT_TOL and lc.decreasing
    return CheckResult(
        "sup_limit",
        ok,
        lc.deviation,
        SUP_LIMIT_TOL,
        f"target {lc.target:.6g}; deviation decreasing over last decade: {lc.decreasing}",
        {"target": lc.target, "trend_exponent": lc.trend.exponent if lc.trend else None},
    )


def l2_rate(ctx: CheckContext) -> CheckResult:
    chk = prof_mod.l2_rate_check(ctx.traj, idx=ctx.idx, prof=ctx.prof)
    ok = chk.relative_error <= L2_RATE_REL_TOL and chk.route_gap <= L2_ROUTE_TOL
    return CheckResult(
        "l2_rate",
        ok,
        chk.fit.exponent,
        chk.target,
        f"relative error {chk.relative_error:.3f} (tol {L2_RATE_REL_TOL}); "
        f"profile-route exponent {chk.profile_fit.exponent:.6f}, gap {chk.route_gap:.2e} (tol {L2_ROUTE_TOL})",
        {"profile_exponent": chk.profile_fit.exponent, "route_gap": chk.route_gap, "relative_error": chk.relative_error},
    )


def profile_algebra(ctx: CheckContext) -> CheckResult:
    traj, prof, p = ctx.traj, ctx.prof, ctx.params
    mag = phase = 0.0
    for s in traj.snapshots:
        om = prof.omega(s)
        mag = max(mag, float(np.max(np.abs(np.abs(om) * prof.psi(s.time) - s.abs))))
        nz = s.abs > 0
        d = np.angle(om[nz]) - (np.angle(s.values[nz]) - prof.theta(s.time)[nz])
        phase = max(phase, float(np.max(np.abs(np.angle(np.exp(1j * d))))))
    inner = prof.grid.inner_mask(0.5)
    a = p.alpha
    v0a = prof.v0_mag_alpha[inner]
    om0a = np.abs(prof.omega0[inner]) ** a
    rel = float(np.max(np.abs(om0a * (1 + prof.f0[inner]) - v0a) / v0a))
    small_f0 = float(np.abs(prof.f0).max()) <= 0.5
    sandwich = bool(np.all(om0a >= (2 / 3) * v0a * (1 - 1e-12)) and np.all(om0a <= 2 * v0a * (1 + 1e-12)))
    ok = mag < ALGEBRA_TOL and phase < ALGEBRA_TOL and rel < OMEGA0_TOL and (sandwich or not small_f0)
    return CheckResult(
        "profile_algebra",
        ok,
        max(mag, phase),
        ALGEBRA_TOL,
        f"|omega|psi vs |v|: {mag:.2e}; phase: {phase:.2e}; omega0 relation: {rel:.2e} (tol {OMEGA0_TOL}); "
        f"||f0||_inf <= 1/2: {small_f0}; sandwich: {sandwich}",
        {"omega0_relation": rel, "sandwich": sandwich, "f0_sup": float(np.abs(prof.f0).max())},
    )


CHECKS = {
    "mass_balance": mass_balance,
    "magnitude_identity": magnitude_identity,
    "profile_error": profile_error,
    "sup_limit": sup_limit,
    "l2_rate": l2_rate,
    "profile_algebra": profile_algebra,
}

PROFILE_CHECKS = ("magnitude_identity", "profile_error", "sup_limit", "l2_rate", "profile_algebra")


def run_checks(traj: Trajectory, idx: IndexSet, names) -> list[CheckResult]:
    ctx = CheckContext(traj, idx)
    out = []
    for name in names:
        if name not in CHECKS:
            raise KeyError(f"unknown check {name!r}")
        try:
            out.append(CHECKS[name](ctx))
        except (ValueError, ArithmeticError, LookupError) as exc:
            out.append(CheckResult(name, False, detail=f"error: {exc}"))
    return out
