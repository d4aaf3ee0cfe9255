"""Pilot-wave dynamics on 1D snapshot sequences.

Particles move with the guidance velocity ``(hbar/m) Im(psi'/psi)``. The
field between grid points and between snapshots is interpolated linearly.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import stats

from . import rng
from .errors import AtNode, OutOfGrid
from .field import NODE_THRESHOLD, Grid, WaveField, fd_gradient, trapezoid


def spectral_gradient(psi: np.ndarray, grid: Grid) -> np.ndarray:
    n = grid.n_points
    if not np.any(np.imag(psi)):
        # real input keeps an exactly real derivative, so v vanishes identically
        kr = 2 * np.pi * np.fft.rfftfreq(n, grid.dx)
        if n % 2 == 0:
            kr[-1] = 0.0
        return np.fft.irfft(1j * kr * np.fft.rfft(np.real(psi)), n).astype(complex)
    k = grid.k.copy()
    if n % 2 == 0:
        k[n // 2] = 0.0
    return np.fft.ifft(1j * k * np.fft.fft(psi))


def gradient(field: WaveField, derivative: str = "auto") -> np.ndarray:
    """``d psi/dx``: spectral on power-of-two grids by default, else finite differences."""
    if derivative == "auto":
        derivative = "spectral" if field.grid.is_power_of_two else "fd"
    if derivative == "spectral":
        return spectral_gradient(field.psi, field.grid)
    if derivative == "fd":
        return fd_gradient(field.psi, field.grid.dx)
    raise ValueError(f"unknown derivative {derivative!r}")


def _locate(grid: Grid, x):
    x = np.asarray(x, dtype=float)
    if np.any((x < grid.x_min) | (x > grid.x_max)) or np.any(~np.isfinite(x)):
        raise OutOfGrid(f"position outside [{grid.x_min}, {grid.x_max}]")
    u = (x - grid.x_min) / grid.dx
    i = np.clip(np.floor(u).astype(int), 0, grid.n_points - 2)
    return i, u - i


def _lerp(values, i, w):
    return (1 - w) * values[..., i] + w * values[..., i + 1]


def guidance_velocity(field: WaveField, x, derivative: str = "auto"):
    """Guidance velocity at ``x`` (scalar or array); zero at nodes of psi."""
    i, w = _locate(field.grid, x)
    psi = _lerp(field.psi, i, w)
    dpsi = _lerp(gradient(field, derivative), i, w)
    return _velocity(psi, dpsi, NODE_THRESHOLD * np.abs(field.psi).max(), field.hbar / field.mass)


def _velocity(psi, dpsi, floor, scale):
    small = np.abs(psi) < floor
    safe = np.where(small, 1.0, psi)
    v = scale * np.imag(dpsi / safe)
    return np.where(small, 0.0, v)


def quantum_potential(field: WaveField, x):
    """``-(hbar^2/2m) |psi|''/|psi|`` from centered second differences, interpolated to ``x``."""
    amp = np.abs(field.psi)
    dx = field.grid.dx
    i, w = _locate(field.grid, x)
    a = _lerp(amp, i, w)
    if np.any(a < NODE_THRESHOLD * amp.max()):
        raise AtNode("quantum potential requested at a node of psi")
    lap = np.empty_like(amp)
    lap[1:-1] = (amp[2:] - 2 * amp[1:-1] + amp[:-2]) / dx**2
    lap[0], lap[-1] = lap[1], lap[-2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(amp > 0, lap / amp, 0.0)
    return -field.hbar**2 / (2 * field.mass) * _lerp(ratio, i, w)


class VelocityField:
    """Guidance velocity on a snapshot sequence, linear in x and in t."""

    def __init__(self, snapshots, derivative: str = "auto"):
        snaps = list(snapshots)
        if not snaps:
            raise ValueError("need at least one snapshot")
        self.grid = snaps[0].grid
        self.times = np.array([s.t for s in snaps])
        if len(snaps) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        self.psi = np.stack([s.psi for s in snaps])
        self.dpsi = np.stack([gradient(s, derivative) for s in snaps])
        self.scale = snaps[0].hbar / snaps[0].mass
        self.floors = NODE_THRESHOLD * np.abs(self.psi).max(axis=1)

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        ts = self.times
        if len(ts) == 1:
            k, s = 0, 0.0
        else:
            k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2))
            s = (t - ts[k]) / (ts[k + 1] - ts[k])
        g = self.grid
        u = (x - g.x_min) / g.dx
        i = np.clip(np.floor(u).astype(int), 0, g.n_points - 2)
        w = u - i
        psi = (1 - s) * _lerp(self.psi[k], i, w)
        dpsi = (1 - s) * _lerp(self.dpsi[k], i, w)
        floor = self.floors[k]
        if s != 0.0:
            psi = psi + s * _lerp(self.psi[k + 1], i, w)
            dpsi = dpsi + s * _lerp(self.dpsi[k + 1], i, w)
            floor = max(floor, self.floors[k + 1])
        return _velocity(psi, dpsi, floor, self.scale)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    label: str = ""
    truncated: bool = False

    def __post_init__(self):
        if len(self.times) != len(self.positions):
            raise ValueError("times and positions differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Positions of ``size`` particles at common ``times``; NaN after a particle leaves the grid."""

    times: np.ndarray
    positions: np.ndarray
    seed: int | None = None
    label: str = ""
    meta: dict = dc_field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.positions.shape[1]

    @property
    def initial(self) -> np.ndarray:
        return self.positions[0]

    @property
    def truncated(self) -> np.ndarray:
        return ~np.isfinite(self.positions[-1])

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.positions[i]

    def trajectory(self, i: int) -> Trajectory:
        col = self.positions[:, i]
        ok = np.isfinite(col)
        n = int(ok.argmin()) if not ok.all() else len(col)
        return Trajectory(self.times[:n], col[:n], label=f"{self.label}{i}",
                          truncated=n < len(col))

    @property
    def trajectories(self) -> list[Trajectory]:
        return [self.trajectory(i) for i in range(self.size)]


def sample_positions(field: WaveField, u: np.ndarray) -> np.ndarray:
    """Map uniforms ``u`` to positions by inverting the trapezoid cumulative of ``|psi|^2``."""
    rho = np.abs(field.psi) ** 2
    dx = field.grid.dx
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * dx)])
    cdf /= cdf[-1]
    x = field.x
    # plateaus (zero density) would make the inverse ambiguous
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return np.interp(u, cdf[keep], x[keep])


def density_cdf(field: WaveField):
    """Callable CDF of the normalized density, linear between grid points."""
    rho = np.abs(field.psi) ** 2
    dx = field.grid.dx
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * dx)])
    cdf /= cdf[-1]
    x = field.x
    return lambda q: np.interp(q, x, cdf)


def sample_ensemble(field: WaveField, n: int, seed: int) -> Ensemble:
    """``n`` i.i.d. draws from ``|psi|^2``; member ``i`` uses stream ``(seed, i)``."""
    u = rng.member_uniforms(seed, n)
    x0 = sample_positions(field, u)
    return Ensemble(np.array([field.t]), x0[None, :], seed=seed)


def _threads() -> int:
    n = int(os.environ.get("INTERP_LAB_THREADS", "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def _rk4(vel: VelocityField, x0: np.ndarray, times: np.ndarray) -> np.ndarray:
    g = vel.grid
    out = np.full((len(times), x0.size), np.nan)
    x = np.array(x0, dtype=float)
    alive = (x >= g.x_min) & (x <= g.x_max)
    x[~alive] = np.nan
    out[0] = x
    for n in range(len(times) - 1):
        t, h = times[n], times[n + 1] - times[n]
        xa = x[alive]
        k1 = vel(xa, t)
        k2 = vel(np.clip(xa + 0.5 * h * k1, g.x_min, g.x_max), t + 0.5 * h)
        k3 = vel(np.clip(xa + 0.5 * h * k2, g.x_min, g.x_max), t + 0.5 * h)
        k4 = vel(np.clip(xa + h * k3, g.x_min, g.x_max), t + h)
        xa = xa + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        x[alive] = xa
        left = alive & ((x < g.x_min) | (x > g.x_max))
        x[left] = np.nan
        alive &= ~left
        out[n + 1] = x
    return out


def integrate_ensemble(snapshots, x0, substeps: int = 1, derivative: str = "auto",
                       seed: int | None = None, label: str = "") -> Ensemble:
    """Fourth-order Runge-Kutta for every start position in ``x0``.

    Each snapshot interval is split into ``substeps`` RK4 steps. Particles
    that leave the grid are frozen as NaN from then on (flagged, not
    reflected).
    """
    vel = VelocityField(snapshots, derivative)
    ts = vel.times
    fine = np.concatenate([np.linspace(ts[i], ts[i + 1], substeps + 1)[:-1]
                           for i in range(len(ts) - 1)] + [ts[-1:]])
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    workers = min(_threads(), max(1, x0.size // 2048))
    if workers > 1:
        chunks = np.array_split(x0, workers)
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _rk4(vel, c, fine), chunks))
        pos = np.concatenate(parts, axis=1)
    else:
        pos = _rk4(vel, x0, fine)
    return Ensemble(ts, pos[::substeps], seed=seed, label=label)


def integrate_trajectory(snapshots, x0: float, substeps: int = 1, derivative: str = "auto",
                         label: str = "") -> Trajectory:
    return integrate_ensemble(snapshots, [x0], substeps, derivative, label=label).trajectory(0)


def run_ensemble(snapshots, n: int, seed: int, substeps: int = 1,
                 derivative: str = "auto") -> Ensemble:
    snaps = list(snapshots)
    start = sample_ensemble(snaps[0], n, seed)
    return integrate_ensemble(snaps, start.initial, substeps, derivative, seed=seed)


def ks_against_density(positions: np.ndarray, field: WaveField):
    """Kolmogorov-Smirnov test of ``positions`` against ``|psi|^2``."""
    pos = positions[np.isfinite(positions)]
    return stats.kstest(pos, density_cdf(field))


def equivariance_check(ensemble: Ensemble, snapshots, t1: float) -> dict:
    """KS statistic between the ensemble at ``t1`` and the density at ``t1``."""
    snaps = list(snapshots)
    times = np.array([s.t for s in snaps])
    field = snaps[int(np.argmin(np.abs(times - t1)))]
    pos = ensemble.at(t1)
    res = ks_against_density(pos, field)
    n = int(np.isfinite(pos).sum())
    return {
        "t": float(field.t),
        "n": n,
        "truncated": int(pos.size - n),
        "ks_statistic": float(res.statistic),
        "p_value": float(res.pvalue),
        "critical_0.01": 1.63 / np.sqrt(max(n, 1)),
    }


def crossings(ensemble: Ensemble) -> int:
    """Number of adjacent pairs (ordered at t0) that end up out of order at some later time."""
    order = np.argsort(ensemble.initial)
    pos = ensemble.positions[:, order]
    ok = np.isfinite(pos[:, 1:]) & np.isfinite(pos[:, :-1])
    bad = (np.diff(pos, axis=1) < 0) & ok
    return int(bad.any(axis=0).sum())
