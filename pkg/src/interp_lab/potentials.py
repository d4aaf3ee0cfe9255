"""Declarative external potentials V(x)."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .field import Grid, WaveField

KINDS = ("free", "harmonic", "gaussian_barrier", "double_slit", "beam_splitter")

_DEFAULTS = {
    "free": {},
    "harmonic": {"omega": 1.0, "center": 0.0},
    "gaussian_barrier": {"height": 1.0, "center": 0.0, "width": 1.0},
    "double_slit": {"center": 0.0, "slit_width": 1.0, "separation": 4.0, "height": 50.0,
                    "edge": 0.0},
    "beam_splitter": {"center": 0.0, "width": 0.25, "height": None, "target": 0.5},
}

_POSITIVE = ("omega", "width", "slit_width", "separation")


@dataclass(frozen=True)
class PotentialSpec:
    """A named potential plus its parameters (natural units).

    ``double_slit`` describes an opaque screen across the transverse coordinate
    with two rectangular windows (optionally softened by ``edge``). It acts at
    the moment the packet crosses it, see :meth:`transmit`; after that the
    motion beyond the screen is free.

    ``beam_splitter`` is a thin Gaussian barrier whose ``height`` may be left
    as ``None`` and set later by tuning against an incident packet.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.params) - set(_DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged = {**_DEFAULTS[self.kind], **self.params}
        for name in _POSITIVE:
            if name in merged and not merged[name] > 0:
                raise ValueError(f"{name} must be > 0")
        h = merged.get("height")
        if h is not None and not np.isfinite(h):
            raise ValueError("height must be finite")
        if merged.get("edge", 0.0) < 0:
            raise ValueError("edge must be >= 0")
        object.__setattr__(self, "params", merged)

    def __getitem__(self, name):
        return self.params[name]

    def with_params(self, **updates) -> "PotentialSpec":
        return replace(self, params={**self.params, **updates})

    @property
    def is_time_independent(self) -> bool:
        return self.kind != "double_slit"

    def evaluate(self, grid: Grid, mass: float = 1.0) -> np.ndarray:
        x = grid.x
        p = self.params
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "harmonic":
            return 0.5 * mass * p["omega"] ** 2 * (x - p["center"]) ** 2
        if self.kind in ("gaussian_barrier", "beam_splitter"):
            if p["height"] is None:
                raise ValueError("beam_splitter height is not tuned yet")
            return p["height"] * np.exp(-((x - p["center"]) ** 2) / (2 * p["width"] ** 2))
        return p["height"] * (1.0 - self.window(grid))

    def window(self, grid: Grid) -> np.ndarray:
        """Transparency profile of the double-slit screen, 1 inside the windows."""
        p = self.params
        x = grid.x - p["center"]
        half = p["slit_width"] / 2
        out = np.zeros_like(x)
        for c in (-p["separation"] / 2, p["separation"] / 2):
            d = np.abs(x - c)
            if p["edge"] > 0:
                out += 0.5 * (1 - np.tanh((d - half) / p["edge"]))
            else:
                out += (d <= half).astype(float)
        return np.clip(out, 0.0, 1.0)

    def transmit(self, field: WaveField) -> tuple[WaveField, float]:
        """Field just beyond the screen and the transmitted probability.

        The barrier is opaque outside the windows at the incident energy, so
        the transmitted amplitude is the incident amplitude restricted to the
        windows (renormalized).
        """
        if self.kind != "double_slit":
            raise ValueError("transmit() applies to double_slit screens only")
        passed = field.with_psi(field.psi * self.window(field.grid))
        frac = passed.norm() ** 2 / field.norm() ** 2
        return passed.normalize(), float(frac)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        d = dict(d)
        return cls(d.pop("kind"), d)


def double_slit_wavenumber(separation: float) -> float:
    """Longitudinal wavenumber whose de Broglie wavelength is a third of the slit separation."""
    return 2 * np.pi / (separation / 3)
