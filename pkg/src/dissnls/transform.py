"""Pseudo-conformal correspondence between the autonomous solution u(t, x)
and the nonautonomous solution v(s, y):

    u(t, x) = (1 + b t)^{-N/2} exp(i b |x|^2 / (4 (1 + b t))) v(t / (1 + b t), x / (1 + b t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrator import AUTONOMOUS, NONAUTONOMOUS, StepPlan, run
from .params import ModelParams
from .spectral import Field, Grid, field_from_function, resample


@dataclass(frozen=True)
class TransformPair:
    u_time: float
    v_time: float
    scale: float  # 1 / (1 + b t) = 1 - b s
    b: float

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("no transform for b < 0")
        if self.b > 0 and not self.v_time < 1 / self.b:
            raise ValueError(f"s = {self.v_time} must precede 1/b")
        if not 0 < self.scale <= 1:
            raise ValueError("scale must lie in (0, 1]")

    @classmethod
    def from_u(cls, t: float, b: float) -> "TransformPair":
        if t < 0:
            raise ValueError("t must be nonnegative")
        if b < 0:
            raise ValueError("no transform for b < 0")
        return cls(t, t / (1 + b * t), 1 / (1 + b * t), b)

    @classmethod
    def from_v(cls, s: float, b: float) -> "TransformPair":
        if b > 0 and not s < 1 / b:
            raise ValueError(f"s = {s} must precede 1/b = {1 / b}")
        r = 1 - b * s
        return cls(s / r, s, r, b)

    @property
    def stretch(self) -> float:
        """1 + b t."""
        return 1 / self.scale


def _chirp(grid: Grid, rate: float) -> np.ndarray:
    return np.exp(1j * rate * grid.r2)


def v_to_u(v: Field, p: ModelParams, target: Grid) -> Field:
    """u at t = s / (1 - b s) from v at s = ``v.time``, sampled on ``target``."""
    tp = TransformPair.from_v(v.time, p.b)
    if p.b == 0:
        return resample(v, 1.0, target)
    rate = p.b * tp.scale / 4
    if not target.guard_chirp(rate):
        raise ValueError("target grid under-resolves the quadratic phase")
    # dilate the smooth field first, then apply the phase pointwise
    w = resample(v, tp.scale, target).values
    return Field(target, tp.scale ** (p.dim / 2) * _chirp(target, rate) * w, tp.u_time)


def u_to_v(u: Field, p: ModelParams, target: Grid) -> Field:
    """Inverse of :func:`v_to_u`: v at s = t / (1 + b t) from u at t = ``u.time``."""
    tp = TransformPair.from_u(u.time, p.b)
    if p.b == 0:
        return resample(u, 1.0, target)
    rate = p.b * tp.scale / 4
    if not u.grid.guard_chirp(rate):
        raise ValueError("source grid under-resolves the quadratic phase")
    # strip the phase on the source grid so the resampled field is smooth
    w = u.new(u.values * _chirp(u.grid, -rate))
    out = resample(w, tp.stretch, target).values
    return Field(target, tp.stretch ** (p.dim / 2) * out, tp.v_time)


def subgrid(grid: Grid, radius: float) -> tuple[Grid, tuple[slice, ...]]:
    """Largest centred grid whose nodes are nodes of ``grid`` and lie in [-radius, radius)."""
    k = int(math.floor(radius / grid.spacing * (1 + 1e-12)))
    k = min(k, grid.points // 2)
    if 2 * k < 16:
        raise ValueError("radius too small for a sub-grid")
    sub = Grid(grid.dim, k * grid.spacing, 2 * k)
    sl = slice(grid.points // 2 - k, grid.points // 2 + k)
    return sub, (sl,) * grid.dim


def sponge(grid: Grid, start: float, strength: float) -> np.ndarray:
    """Quadratic absorbing-layer rate, zero for max |x_i| <= start."""
    edge = np.zeros(grid.shape)
    for c in grid.coords:
        edge = np.maximum(edge, np.broadcast_to(np.abs(c), grid.shape))
    ramp = np.clip((edge - start) / (grid.half_width - start), 0.0, None)
    return strength * ramp**2


@dataclass
class EquivalenceResult:
    times: tuple[float, ...]
    discrepancy: np.ndarray
    radius: np.ndarray


def equivalence_test(
    v0_func,
    p: ModelParams,
    times,
    v_grid: Grid,
    u_grid: Grid,
    v_dt: float = 5e-5,
    v_adapt_c: float = 0.0025,
    u_dt: float = 2e-3,
    sponge_start: float | None = None,
    sponge_strength: float = 500.0,
    radius: float | None = None,
) -> EquivalenceResult:
    """Run v through the nonautonomous equation and u = e^{ib|x|^2/4} v0 through
    the autonomous one, then compare v_to_u(v(s)) with u(t) at matched times.

    The comparison region is |x|_inf <= ``radius`` (default: the inner half of
    the u-box), shrunk to the reliable region of the dilation. ``sponge_start``
    enables an absorbing layer in the u-run; it must lie outside the region.
    """
    times = tuple(float(t) for t in times)
    if any(t < 0 for t in times) or list(times) != sorted(times):
        raise ValueError("times must be nonnegative and increasing")
    b = p.b
    pairs = [TransformPair.from_u(t, b) for t in times]
    radius = u_grid.half_width / 2 if radius is None else radius
    if sponge_start is not None and sponge_start < radius:
        raise ValueError("sponge must start outside the comparison region")

    v0 = field_from_function(v_grid, v0_func)
    u0 = field_from_function(u_grid, lambda *x: np.exp(1j * b * sum(c**2 for c in x) / 4) * v0_func(*x))
    damp = None if sponge_start is None else sponge(u_grid, sponge_start, sponge_strength)

    positive = [tp for tp in pairs if tp.u_time > 0]
    v_snap, u_snap = {}, {}
    if positive:
        s_marks = tuple(tp.v_time for tp in positive)
        tv = run(
            v0,
            StepPlan(NONAUTONOMOUS, dt=v_dt, t_end=s_marks[-1], adapt_c=v_adapt_c,
                     snapshot_stride=10**9, snapshot_times=s_marks, track_profile=False),
            p,
        )
        tu = run(
            u0,
            StepPlan(AUTONOMOUS, dt=u_dt, t_end=positive[-1].u_time, snapshot_stride=10**9,
                     snapshot_times=tuple(tp.u_time for tp in positive), track_profile=False),
            p,
            damping=damp,
        )
        for tp in positive:
            v_snap[tp.u_time] = _at_time(tv.snapshots, tp.v_time)
            u_snap[tp.u_time] = _at_time(tu.snapshots, tp.u_time)

    out, radii = [], []
    for tp in pairs:
        vs = v_snap.get(tp.u_time, v0)
        us = u_snap.get(tp.u_time, u0)
        if tp.u_time == 0 and u_grid == v_grid:
            out.append(float(np.abs(us.values - v_to_u(vs, p, u_grid).values).max()))
            radii.append(u_grid.half_width)
            continue
        R = min(radius, 0.9 * v_grid.half_width / tp.scale)
        sub, sl = subgrid(u_grid, R)
        w = v_to_u(vs, p, sub)
        out.append(float(np.abs(us.values[sl] - w.values).max()))
        radii.append(sub.half_width)
    return EquivalenceResult(times, np.array(out), np.array(radii))


def _at_time(snaps: list[Field], t: float) -> Field:
    for s in snaps:
        if abs(s.time - t) <= 1e-12 * max(1.0, t):
            return s
    raise LookupError(f"no snapshot at t = {t}")
