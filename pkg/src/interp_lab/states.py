"""Closed-form initial states and analytic reference solutions."""
from __future__ import annotations

import numpy as np

from .field import Grid, WaveField


def gaussian(grid: Grid, x0: float = 0.0, sigma: float = 1.0, k0: float = 0.0,
             t: float = 0.0, hbar: float = 1.0, mass: float = 1.0) -> WaveField:
    """Normalized packet ``exp(-(x-x0)^2 / (2 sigma^2) + i k0 x)``.

    ``sigma`` is the amplitude width; the density has standard deviation
    ``sigma / sqrt(2)``.
    """
    f = free_gaussian(grid, 0.0, x0=x0, sigma=sigma, k0=k0, hbar=hbar, mass=mass)
    return f.with_psi(f.psi, t=t)


def free_gaussian(grid: Grid, t: float, x0: float = 0.0, sigma: float = 1.0, k0: float = 0.0,
                  hbar: float = 1.0, mass: float = 1.0) -> WaveField:
    """Exact free-particle evolution of :func:`gaussian` to time ``t``."""
    x = grid.x
    alpha = 1 + 1j * hbar * t / (mass * sigma**2)
    exponent = (-(x - x0) ** 2 / (2 * sigma**2) + 1j * k0 * (x - x0)
                - 1j * hbar * k0**2 * t / (2 * mass)) / alpha
    psi = (np.pi * sigma**2) ** -0.25 / np.sqrt(alpha) * np.exp(exponent + 1j * k0 * x0)
    return WaveField(grid, psi, t=t, hbar=hbar, mass=mass)


def free_width(t: float, sigma: float = 1.0, hbar: float = 1.0, mass: float = 1.0) -> float:
    """Amplitude width ``sigma(t)`` of a freely spreading Gaussian."""
    return sigma * np.sqrt(1 + (hbar * t / (mass * sigma**2)) ** 2)


def plane_wave(grid: Grid, k: float, hbar: float = 1.0, mass: float = 1.0) -> WaveField:
    """Unit-modulus ``exp(i k x)`` (not normalizable on the line; left unnormalized)."""
    return WaveField(grid, np.exp(1j * k * grid.x), hbar=hbar, mass=mass)


def harmonic_ground_state(grid: Grid, omega: float = 1.0, center: float = 0.0,
                          displacement: float = 0.0, hbar: float = 1.0,
                          mass: float = 1.0) -> WaveField:
    """Analytic ground state of ``m omega^2 (x-center)^2 / 2``, optionally displaced.

    A nonzero ``displacement`` gives the coherent state that oscillates
    rigidly about ``center``.
    """
    s = mass * omega / hbar
    xc = grid.x - center - displacement
    psi = (s / np.pi) ** 0.25 * np.exp(-s * xc**2 / 2)
    return WaveField(grid, psi, hbar=hbar, mass=mass)


def two_lobe(grid: Grid, separation: float, weights=(0.5, 0.5), sigma: float = 1.0,
             k0: float = 0.0) -> WaveField:
    """Superposition of Gaussians at ``+-separation/2`` with probability ``weights``."""
    w_left, w_right = weights
    left = gaussian(grid, -separation / 2, sigma, k0).psi
    right = gaussian(grid, separation / 2, sigma, k0).psi
    return WaveField(grid, np.sqrt(w_left) * left + np.sqrt(w_right) * right).normalize()


def stationary_state(grid: Grid, potential, level: int = 0, method: str = "crank_nicolson",
                     hbar: float = 1.0, mass: float = 1.0) -> tuple[WaveField, float]:
    """Eigenstate of the discretized Hamiltonian used by ``method``, and its energy.

    These states are exactly stationary under the matching propagator (up to
    roundoff), unlike the continuum formulas sampled on the grid.
    """
    from scipy.linalg import eigh, eigh_tridiagonal

    v = potential.evaluate(grid, mass)
    dx = grid.dx
    kin = hbar**2 / (2 * mass * dx**2)
    if method == "crank_nicolson":
        d = 2 * kin + v[1:-1]
        e = np.full(d.size - 1, -kin)
        w, vec = eigh_tridiagonal(d, e, select="i", select_range=(level, level))
        psi = np.zeros(grid.n_points)
        psi[1:-1] = vec[:, 0]
    elif method == "split_step":
        n = grid.n_points
        k = grid.k
        f = np.fft.fft(np.eye(n), axis=0)
        t = np.real(np.fft.ifft((hbar**2 * k**2 / (2 * mass))[:, None] * f, axis=0))
        h = 0.5 * (t + t.T) + np.diag(v)
        w, vec = eigh(h, subset_by_index=(level, level))
        psi = vec[:, 0]
    else:
        raise ValueError(f"unknown method {method!r}")
    i = int(np.argmax(np.abs(psi)))
    psi = psi * np.sign(psi[i])
    return WaveField(grid, psi, hbar=hbar, mass=mass).normalize(), float(w[0])
