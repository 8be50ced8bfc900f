"""Weighted seminorms of the regularity space and the growth monitors
Phi_1..Phi_4 built from them."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .params import IndexSet, SigmaSchedule
from .spectral import Field, derivative_multiplier, fft, ifft

TAIL_LIMIT = 1e-8
# beyond this order double-precision Fourier differentiation is mostly round-off
MAX_ORDER = 16


def multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for combo in combinations_with_replacement(range(dim), order):
        beta = [0] * dim
        for ax in combo:
            beta[ax] += 1
        out.append(tuple(beta))
    return out


@dataclass
class SeminormTable:
    t: float
    fam1: dict[int, float]
    fam2: dict[int, float]
    fam3: dict[int, float]
    x_norm: float
    inf_weighted: float
    tail: float = 0.0

    @property
    def tail_ok(self) -> bool:
        return self.tail <= TAIL_LIMIT

    def family(self, which: int) -> dict[int, float]:
        return (self.fam1, self.fam2, self.fam3)[which - 1]


def _tail(coeffs: np.ndarray, f: Field) -> float:
    c = np.abs(coeffs)
    peak = c.max()
    if peak == 0:
        return 0.0
    g = f.grid
    hi = np.zeros(g.shape, dtype=bool)
    for ax in range(g.dim):
        hi |= np.broadcast_to(g._broadcast(np.abs(g.wavenumbers) > (2 / 3) * np.pi / g.spacing, ax), g.shape)
    return float(c[hi].max() / peak)


def seminorms(f: Field, idx: IndexSet, warn: bool = True) -> SeminormTable:
    g = f.grid
    if idx.J > MAX_ORDER:
        raise ValueError(f"J = {idx.J} exceeds the usable derivative order {MAX_ORDER}")
    jap = g.japanese
    w_n = jap**idx.n
    dv = g.cell_volume
    coeffs = fft(f.values)
    tail = _tail(coeffs, f)
    if warn and tail > TAIL_LIMIT:
        warnings.warn(
            f"spectral tail {tail:.2e} above {TAIL_LIMIT:.0e}: high-order seminorms are unreliable",
            RuntimeWarning,
            stacklevel=2,
        )

    r1, r2, r3 = idx.ranges
    m2 = 2 * idx.m
    sup_by_order: dict[int, float] = {}
    l2_by_order: dict[int, float] = {}  # <x>^n weight, max over |beta| = order
    x_norm = 0.0
    l2_cache: dict[tuple[int, ...], np.ndarray] = {}

    for order in range(idx.J + 1):
        sups, l2s = [], []
        for beta in multi_indices(g.dim, order):
            d = np.abs(ifft(coeffs * derivative_multiplier(g, beta))) if order else np.abs(f.values)
            if order <= m2:
                sups.append(float((w_n * d).max()))
            else:
                l2_cache[beta] = d
                l2s.append(float(np.sqrt(np.sum((w_n * d) ** 2) * dv)))
        if order <= m2:
            sup_by_order[order] = max(sups)
            x_norm += max(sups)
        else:
            l2_by_order[order] = max(l2s)

    # second part of the norm: sum over nu <= k+1, mu <= n, |beta| = nu + mu + 2m + 1
    for nu in range(idx.k + 2):
        for mu in range(idx.n + 1):
            order = nu + mu + m2 + 1
            if order > idx.J:
                continue
            w = jap ** (idx.n - mu)
            for beta in multi_indices(g.dim, order):
                x_norm += float(np.sqrt(np.sum((w * l2_cache[beta]) ** 2) * dv))

    fam1, fam2, fam3 = {}, {}, {}
    run = 0.0
    for ell in r1:
        run = max(run, sup_by_order[ell])
        fam1[ell] = run
    run = 0.0
    for ell in r2:
        run = max(run, l2_by_order[ell])
        fam2[ell] = run
    for ell in r3:
        w = jap ** (idx.J - ell)
        best = 0.0
        for order in range(r3.start, ell + 1):
            for beta in multi_indices(g.dim, order):
                best = max(best, float(np.sqrt(np.sum((w * l2_cache[beta]) ** 2) * dv)))
        fam3[ell] = best

    inf_w = float((w_n * np.abs(f.values)).min())
    return SeminormTable(f.time, fam1, fam2, fam3, x_norm, inf_w, tail)


def data_bound(table: SeminormTable) -> float:
    """||v0||_X + (inf <x>^n |v0|)^{-1}; the smallest admissible K."""
    if table.inf_weighted <= 0:
        return np.inf
    return table.x_norm + 1.0 / table.inf_weighted


@dataclass
class MonitorReport:
    Phi1: float
    Phi2: float
    Phi3: float
    Phi4: float
    K: float
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    running_Psi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tables: list[SeminormTable] = field(default_factory=list)
    decay_bound_ok: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def PhiT(self) -> float:
        return max(self.Phi1, self.Phi2, self.Phi3)

    @property
    def PsiT(self) -> float:
        return max(self.PhiT, self.Phi4)

    @property
    def bound_4K_ok(self) -> bool:
        return bool(self.PsiT <= 4 * self.K)

    @property
    def bound_4K_history(self) -> np.ndarray:
        return self.running_Psi <= 4 * self.K

    @property
    def first_violation(self) -> float | None:
        bad = np.flatnonzero(~self.bound_4K_history)
        return float(self.times[bad[0]]) if bad.size else None


def decay_bound_holds(sup_norm: float, remaining: float, params) -> bool:
    """Pointwise decay bound ||v||_inf^alpha <= C r^g / (1 - r^g) at 1 - b t = r < 1."""
    g = params.gap
    rg = remaining**g
    if rg >= 1:
        return True
    return bool(sup_norm**params.alpha <= params.limit_constant() * rg / (1 - rg))


class MonitorStream:
    """Running Phi_1..Phi_4, fed one snapshot at a time."""

    def __init__(self, params, sched: SigmaSchedule, idx: IndexSet, phi=None):
        self.params = params
        self.sched = sched
        self.idx = idx
        self.phi = [0.0] * 4 if phi is None else list(phi)

    def update(self, snap: Field, remaining: float) -> tuple[SeminormTable, float, bool]:
        p, sched = self.params, self.sched
        tab = seminorms(snap, self.idx, warn=False)
        if tab.inf_weighted == 0:
            raise ZeroDivisionError(f"inf <x>^n |v| vanishes at t = {snap.time}: Phi_4 undefined")
        for i, rng in enumerate(self.idx.ranges):
            fam = tab.family(i + 1)
            self.phi[i] = max(self.phi[i], max(remaining ** sched[j] * fam[j] for j in rng))
        self.phi[3] = max(self.phi[3], remaining ** sched[1] / tab.inf_weighted)
        decay = True
        if p.b > 0 and p.lambda_re < 0 and p.gap > 0 and snap.time > 0:
            decay = decay_bound_holds(float(snap.abs.max()), float(remaining), p)
        return tab, max(self.phi), decay


def monitors(traj, sched: SigmaSchedule, idx: IndexSet, K: float | None = None) -> MonitorReport:
    if not traj.snapshots:
        raise ValueError("empty trajectory")
    p = traj.params
    K = p.K if K is None else K
    stream = MonitorStream(p, sched, idx)
    running, tables, decay = [], [], []
    for snap, r in zip(traj.snapshots, traj.remaining):
        tab, psi, ok = stream.update(snap, float(r))
        tables.append(tab)
        running.append(psi)
        decay.append(ok)
    return MonitorReport(
        *stream.phi,
        K=K,
        times=traj.times,
        running_Psi=np.array(running),
        tables=tables,
        decay_bound_ok=np.array(decay),
    )
