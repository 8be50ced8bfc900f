"""Periodic pseudo-spectral machinery on a truncated box [-L, L)^N."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class Grid:
    dim: int
    half_width: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if self.points < 16 or self.points % 2:
            raise ValueError("points per axis must be even and >= 16")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.points)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """pi j / L in FFT order, j = 0, 1, ..., M/2-1, -M/2, ..., -1."""
        return 2 * np.pi * sfft.fftfreq(self.points, d=self.spacing)

    def _broadcast(self, a: np.ndarray, ax: int) -> np.ndarray:
        shape = [1] * self.dim
        shape[ax] = self.points
        return a.reshape(shape)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Sparse (broadcastable) coordinate arrays, one per axis."""
        return tuple(self._broadcast(self.axis, a) for a in range(self.dim))

    @cached_property
    def r2(self) -> np.ndarray:
        return sum(np.broadcast_to(c, self.shape) ** 2 for c in self.coords)

    @cached_property
    def japanese(self) -> np.ndarray:
        """<x> = (1 + |x|^2)^(1/2)."""
        return np.sqrt(1.0 + self.r2)

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(np.broadcast_to(self._broadcast(self.wavenumbers, a), self.shape) ** 2 for a in range(self.dim))

    def inner_mask(self, fraction: float = 0.5) -> np.ndarray:
        return self.r2 <= (fraction * self.half_width) ** 2

    def outer_mask(self, fraction: float = 0.1) -> np.ndarray:
        """Nodes within ``fraction * L`` of the box boundary along some axis."""
        lim = (1.0 - fraction) * self.half_width
        mask = np.zeros(self.shape, dtype=bool)
        for c in self.coords:
            mask |= np.broadcast_to(np.abs(c) > lim, self.shape)
        return mask

    def guard_chirp(self, rate: float) -> bool:
        """At least 8 samples per wrap of exp(i rate |x|^2) at the box edge."""
        return 2 * abs(rate) * self.half_width * self.spacing <= np.pi / 4 + 1e-12


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("field contains non-finite samples")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def new(self, values: np.ndarray, time: float | None = None) -> "Field":
        return Field(self.grid, values, self.time if time is None else time)

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)


def fft(values: np.ndarray) -> np.ndarray:
    return sfft.fftn(values, workers=-1)


def ifft(coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifftn(coeffs, workers=-1)


def apply_multiplier(f: Field, mult: np.ndarray, time: float | None = None) -> Field:
    return f.new(ifft(fft(f.values) * mult), time)


def laplacian(f: Field) -> Field:
    return apply_multiplier(f, -f.grid.k2)


def laplacian_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    return ifft(fft(values) * (-grid.k2))


def _as_multi_index(beta, dim: int) -> tuple[int, ...]:
    if np.isscalar(beta):
        beta = (int(beta),) + (0,) * (dim - 1)
    beta = tuple(int(b) for b in beta)
    if len(beta) != dim or min(beta) < 0:
        raise ValueError(f"bad multi-index {beta} for dim={dim}")
    return beta


def derivative_multiplier(grid: Grid, beta) -> np.ndarray:
    beta = _as_multi_index(beta, grid.dim)
    mult = np.ones(grid.shape, dtype=complex)
    nyq = grid.points // 2
    for ax, order in enumerate(beta):
        if order == 0:
            continue
        xi = (1j * grid.wavenumbers) ** order
        if order % 2:
            # odd derivatives of the unpaired Nyquist mode are not real-representable
            xi[nyq] = 0.0
        mult = mult * grid._broadcast(xi, ax)
    return mult


def derivative(f: Field, beta, J: int | None = None) -> Field:
    beta = _as_multi_index(beta, f.grid.dim)
    if J is not None and sum(beta) > J:
        raise ValueError(f"|beta| = {sum(beta)} exceeds J = {J}")
    if sum(beta) == 0:
        return f
    return apply_multiplier(f, derivative_multiplier(f.grid, beta))


def free_propagator(grid: Grid, dt: float) -> np.ndarray:
    return np.exp(-1j * grid.k2 * dt)


def free_propagate(f: Field, dt: float) -> Field:
    if dt == 0:
        return f
    return apply_multiplier(f, free_propagator(f.grid, dt), f.time + dt)


def l2_norm(f: Field | np.ndarray, grid: Grid | None = None) -> float:
    if isinstance(f, Field):
        grid, vals = f.grid, f.values
    else:
        vals = f
    return float(np.sqrt(np.sum(np.abs(vals) ** 2) * grid.cell_volume))


def l2_norm_fourier(f: Field) -> float:
    c = fft(f.values)
    return float(np.sqrt(np.sum(np.abs(c) ** 2) * f.grid.cell_volume / c.size))


def lp_norm_power(f: Field, p: float) -> float:
    """``||f||_p^p`` by rectangle-rule quadrature."""
    return float(np.sum(np.abs(f.values) ** p) * f.grid.cell_volume)


def sup_norm(f: Field, mask: np.ndarray | None = None) -> float:
    a = f.abs if mask is None else f.abs[mask]
    return float(a.max()) if a.size else 0.0


def boundary_contamination(f: Field, fraction: float = 0.1) -> float:
    """max |f| over the outer annulus of the box."""
    return float(f.abs[f.grid.outer_mask(fraction)].max())


def spectral_tail(f: Field, band: float = 2.0 / 3.0) -> float:
    """max |f_hat| over modes with |xi| above ``band * xi_max``, relative to the peak."""
    c = np.abs(fft(f.values))
    peak = c.max()
    if peak == 0:
        return 0.0
    xi_max = np.pi / f.grid.spacing
    hi = np.zeros(f.grid.shape, dtype=bool)
    for ax in range(f.grid.dim):
        hi |= np.broadcast_to(f.grid._broadcast(np.abs(f.grid.wavenumbers) > band * xi_max, ax), f.grid.shape)
    return float(c[hi].max() / peak)


_CHUNK = 2048


def _eval_matrix(src: Grid, pts: np.ndarray) -> np.ndarray:
    """Rows: trigonometric interpolant basis of ``src`` evaluated at ``pts``."""
    xi = src.wavenumbers
    ph = np.outer(pts + src.half_width, xi)
    E = np.exp(1j * ph)
    nyq = src.points // 2
    # split the Nyquist mode symmetrically so real data interpolate to real values
    E[:, nyq] = np.cos(ph[:, nyq])
    return E


def resample(f: Field, scale: float, target: Grid, reliable: float = 0.9) -> Field:
    """Return g(x) = f(scale * x) sampled on ``target``.

    Uses direct summation of the Fourier series of ``f``; exact for
    band-limited data. Raises ``ValueError`` when some dilated target node
    leaves ``|y| <= reliable * L`` of the source box.
    """
    src = f.grid
    if not scale > 0:
        raise ValueError("scale must be positive")
    if target.dim != src.dim:
        raise ValueError("dimension mismatch")
    if scale == 1.0 and target == src:
        return f.new(np.array(f.values))
    reach = scale * np.abs(target.axis).max()
    if reach > reliable * src.half_width * (1 + 1e-12):
        raise ValueError(
            f"dilated target reaches |y| = {reach:.4g} beyond the reliable region "
            f"{reliable} * L = {reliable * src.half_width:.4g}"
        )
    out = fft(f.values) / src.points**src.dim
    for ax in range(src.dim):
        pts = scale * target.axis
        out = np.moveaxis(out, ax, -1)
        res = np.empty(out.shape[:-1] + (target.points,), dtype=complex)
        for lo in range(0, target.points, _CHUNK):
            E = _eval_matrix(src, pts[lo : lo + _CHUNK])
            res[..., lo : lo + _CHUNK] = out @ E.T
        out = np.moveaxis(res, -1, ax)
    return Field(target, out, f.time)


def evaluate_at(f: Field, points: Sequence[float]) -> np.ndarray:
    """Off-grid evaluation of a 1-D field at arbitrary points."""
    if f.grid.dim != 1:
        raise ValueError("evaluate_at is 1-D only")
    c = fft(f.values) / f.grid.points
    return _eval_matrix(f.grid, np.asarray(points, dtype=float)) @ c


def field_from_function(grid: Grid, func, time: float = 0.0) -> Field:
    """Sample ``func(*coords)`` on the grid (coords are broadcastable arrays)."""
    vals = np.broadcast_to(func(*grid.coords), grid.shape)
    return Field(grid, np.array(vals, dtype=complex), time)
