"""Uniform 1D grids, wavefunctions on them, and the density/current diagnostics.

All diagnostics here use centered second-order finite differences, so every
propagator is judged by the same ruler.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

import numpy as np

from .errors import GridMismatch

NODE_THRESHOLD = 1e-14


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_i = x_min + i*dx`` with both endpoints included."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise ValueError(f"n_points must be an integer >= 8, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_points) * self.dx

    @property
    def is_power_of_two(self) -> bool:
        n = self.n_points
        return n & (n - 1) == 0

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers of the discrete Fourier modes (period ``n*dx``)."""
        return 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @property
    def dk(self) -> float:
        return 2 * np.pi / (self.n_points * self.dx)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n_points": self.n_points}


def trapezoid(values: np.ndarray, dx: float) -> float | complex:
    values = np.asarray(values)
    return dx * (values.sum() - 0.5 * (values[0] + values[-1]))


@dataclass(frozen=True, eq=False)
class WaveField:
    """Complex amplitudes ``psi`` sampled on ``grid`` at time ``t``."""

    grid: Grid
    psi: np.ndarray
    t: float = 0.0
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex)
        if psi.shape != (self.grid.n_points,):
            raise ValueError(f"psi has shape {psi.shape}, grid needs ({self.grid.n_points},)")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def norm(self) -> float:
        return float(np.sqrt(trapezoid(np.abs(self.psi) ** 2, self.grid.dx)))

    def normalize(self) -> "WaveField":
        nrm = self.norm()
        if not np.isfinite(nrm) or nrm <= 0:
            raise ValueError("cannot normalize a field with zero or non-finite norm")
        return self.with_psi(self.psi / nrm)

    def with_psi(self, psi, t: float | None = None) -> "WaveField":
        return replace(self, psi=psi, t=self.t if t is None else t)

    def momentum_amplitudes(self) -> tuple[np.ndarray, np.ndarray]:
        """``(k, psi_k)`` with ``sum |psi_k|^2 dk == sum |psi|^2 dx`` (Parseval)."""
        g = self.grid
        psi_k = np.fft.fft(self.psi) * g.dx / np.sqrt(2 * np.pi)
        return g.k, psi_k


def same_grid(a: WaveField, b: WaveField) -> None:
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")


def fd_gradient(values: np.ndarray, dx: float) -> np.ndarray:
    """Centered differences inside, one-sided second order at the ends."""
    return np.gradient(values, dx, edge_order=2)


def node_mask(psi: np.ndarray) -> np.ndarray:
    amp = np.abs(psi)
    peak = amp.max() if amp.size else 0.0
    return amp < NODE_THRESHOLD * peak


@dataclass(frozen=True, eq=False)
class DensityCurrent:
    rho: np.ndarray
    t: float
    j: np.ndarray | None = dc_field(default=None)


def density(field: WaveField) -> DensityCurrent:
    return DensityCurrent(rho=np.abs(field.psi) ** 2, t=field.t)


def current(field: WaveField) -> DensityCurrent:
    """Probability current ``(hbar/m) Im(conj(psi) dpsi/dx)``; zero at nodes."""
    psi = field.psi
    j = field.hbar / field.mass * np.imag(np.conj(psi) * fd_gradient(psi, field.grid.dx))
    j[node_mask(psi)] = 0.0
    return DensityCurrent(rho=np.abs(psi) ** 2, j=j, t=field.t)


def continuity_residual(field_t: WaveField, field_t_plus_dt: WaveField) -> float:
    """Max interior ``|d(rho)/dt + d(j)/dx|`` with the current averaged over the step."""
    same_grid(field_t, field_t_plus_dt)
    dt = field_t_plus_dt.t - field_t.t
    if not dt > 0:
        raise ValueError("second snapshot must be later than the first")
    a, b = current(field_t), current(field_t_plus_dt)
    drho = (b.rho - a.rho) / dt
    j_mid = 0.5 * (a.j + b.j)
    dx = field_t.grid.dx
    div = (j_mid[2:] - j_mid[:-2]) / (2 * dx)
    return float(np.max(np.abs(drho[1:-1] + div)))


def overlap(a: WaveField, b: WaveField) -> complex:
    """Trapezoid-rule ``<a|b>`` (antilinear in ``a``)."""
    same_grid(a, b)
    return complex(trapezoid(np.conj(a.psi) * b.psi, a.grid.dx))


def boundary_leak(field: WaveField, cells: int = 5) -> float:
    """Probability within ``cells`` grid cells of either edge."""
    rho = np.abs(field.psi) ** 2
    dx = field.grid.dx
    return float(dx * (rho[:cells].sum() + rho[-cells:].sum()))


def expectation_x(field: WaveField) -> tuple[float, float]:
    """Mean and variance of position under the (normalized) density."""
    rho = np.abs(field.psi) ** 2
    x = field.x
    dx = field.grid.dx
    p = trapezoid(rho, dx)
    mean = trapezoid(x * rho, dx) / p
    var = trapezoid((x - mean) ** 2 * rho, dx) / p
    return float(mean), float(var)


# -- serialization ---------------------------------------------------------

def write_field(field: WaveField, stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (x, re, im) and ``<stem>.json`` (grid, t, hbar, mass)."""
    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    json_path = stem.with_suffix(".json")
    data = np.column_stack([field.x, field.psi.real, field.psi.imag])
    with open(csv_path, "w", newline="\n") as fh:
        fh.write("x,re_psi,im_psi\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")
    header = {"grid": field.grid.to_dict(), "t": field.t, "hbar": field.hbar, "mass": field.mass}
    json_path.write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")
    return csv_path, json_path


def read_field(stem: str | Path) -> WaveField:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    data = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    grid = Grid(**header["grid"])
    return WaveField(grid, data[:, 1] + 1j * data[:, 2], t=header["t"],
                     hbar=header["hbar"], mass=header["mass"])
