"""Stochastic jump dynamics: a hidden configuration resampled from the Born density.

At Poisson-distributed instants the configuration is redrawn from
``|psi(., t)|^2`` in a preferred basis (grid positions, discrete Fourier
wavenumbers, or the labels of a discrete state). Between jumps it stays put.
Successive jumps are independent draws.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import BranchesOverlap, TooFewJumps
from .field import WaveField, trapezoid
from .stats import chisquare_counts

BASES = ("position", "momentum", "discrete")


@dataclass(frozen=True)
class JumpProcess:
    basis: str = "position"
    rate: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}")
        if not self.rate > 0:
            raise ValueError("rate must be > 0")


@dataclass(frozen=True, eq=False)
class JumpRecord:
    """Jump instants and the configuration drawn at each (first entry is the initial draw)."""

    times: np.ndarray
    values: np.ndarray
    basis: str
    labels: tuple | None = None

    def __len__(self):
        return len(self.times)

    @property
    def n_jumps(self) -> int:
        return max(len(self.times) - 1, 0)

    def value_names(self) -> list:
        if self.labels is None:
            return list(self.values)
        return [self.labels[int(v)] for v in self.values]


def born_weights(field: WaveField, basis: str) -> tuple[np.ndarray, np.ndarray]:
    """Support points and their Born probabilities in ``basis``."""
    if basis == "position":
        w = np.abs(field.psi) ** 2
        support = field.x
    elif basis == "momentum":
        k, pk = field.momentum_amplitudes()
        w = np.abs(pk) ** 2
        order = np.argsort(k)
        support, w = k[order], w[order]
    else:
        raise ValueError(f"basis {basis!r} needs a discrete state, not a WaveField")
    return support, w / w.sum()


def draw(weights: np.ndarray, gen: np.random.Generator, size=None):
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, gen.random(size), side="right")
    return np.minimum(idx, len(weights) - 1)


def jump_sample(field: WaveField, process: JumpProcess, t: float | None = None,
                gen: np.random.Generator | None = None, size=None):
    """One configuration (or ``size`` of them) drawn from the Born density of ``field``.

    ``t`` is informational; the caller supplies the field at that instant.
    """
    gen = gen if gen is not None else rng.stream(process.seed)
    support, w = born_weights(field, process.basis)
    return support[draw(w, gen, size)]


def parseval_gap(field: WaveField) -> float:
    """``|sum |psi|^2 dx - sum |psi_k|^2 dk|`` on the discrete grid."""
    k, pk = field.momentum_amplitudes()
    return float(abs(np.sum(np.abs(field.psi) ** 2) * field.grid.dx
                     - np.sum(np.abs(pk) ** 2) * field.grid.dk))


def field_at(snapshots, t: float) -> WaveField:
    """Snapshot field linearly interpolated in time."""
    snaps = list(snapshots)
    times = np.array([s.t for s in snaps])
    if len(snaps) == 1:
        return snaps[0]
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    s = (t - times[k]) / (times[k + 1] - times[k])
    if s == 0:
        return snaps[k]
    psi = (1 - s) * snaps[k].psi + s * snaps[k + 1].psi
    return snaps[k].with_psi(psi, t=t)


def poisson_times(gen: np.random.Generator, rate: float, t0: float, t1: float) -> np.ndarray:
    n = gen.poisson(rate * (t1 - t0))
    return np.sort(gen.uniform(t0, t1, n))


def run_jump_process(snapshots, process: JumpProcess, run: int = 0,
                     t0: float | None = None, t1: float | None = None) -> JumpRecord:
    """Simulate one jump history over the span of ``snapshots``.

    Run ``run`` draws from stream ``(process.seed, run)``.
    """
    snaps = list(snapshots)
    t0 = snaps[0].t if t0 is None else t0
    t1 = snaps[-1].t if t1 is None else t1
    gen = rng.stream(process.seed, run)
    times = np.concatenate([[t0], poisson_times(gen, process.rate, t0, t1)])
    values = np.array([jump_sample(field_at(snaps, t), process, t, gen) for t in times])
    return JumpRecord(times, values, process.basis)


def final_configurations(snapshots, process: JumpProcess, n_runs: int,
                         t1: float | None = None, observed: bool = True) -> np.ndarray:
    """Configuration at ``t1`` for ``n_runs`` independent histories.

    ``observed=True`` returns what a look at ``t1`` finds: a Born draw at
    ``t1`` itself. ``observed=False`` returns the frozen value left by the
    last jump before ``t1``; its law mixes ``|psi|^2`` over earlier times and
    matches ``|psi(t1)|^2`` only when the density is stationary. Draws are
    independent, so only the last jump time of each history is simulated.
    """
    snaps = list(snapshots)
    t0 = snaps[0].t
    t1 = snaps[-1].t if t1 is None else t1
    out = np.empty(n_runs)
    final = field_at(snaps, t1)
    for r in range(n_runs):
        gen = rng.stream(process.seed, r)
        times = poisson_times(gen, process.rate, t0, t1)
        t_last = times[-1] if times.size else t0
        field = final if observed else field_at(snaps, t_last)
        out[r] = jump_sample(field, process, t1 if observed else t_last, gen)
    return out


def discrete_jump_process(probabilities, rate: float, duration: float, seed: int,
                          labels=None, run: int = 0, t0: float = 0.0) -> JumpRecord:
    """Jump record over discrete basis labels with fixed Born ``probabilities``."""
    p = np.asarray(probabilities, dtype=float)
    gen = rng.stream(seed, run)
    times = np.concatenate([[t0], poisson_times(gen, rate, t0, t0 + duration)])
    values = draw(p / p.sum(), gen, times.size)
    return JumpRecord(times, values, "discrete", tuple(labels) if labels is not None else None)


def superluminal_stats(record: JumpRecord, thresholds=(1.0, 10.0, 100.0)) -> dict:
    """Effective velocities ``dx/dt`` between successive draws of a record."""
    if len(record) < 2:
        raise TooFewJumps("need at least two draws to form a velocity")
    v = np.diff(np.asarray(record.values, dtype=float)) / np.diff(record.times)
    speed = np.abs(v)
    return {
        "n_jumps": record.n_jumps,
        "max_speed": float(speed.max()),
        "median_speed": float(np.median(speed)),
        "mean_speed": float(speed.mean()),
        "fraction_above": {str(th): float((speed > th).mean()) for th in thresholds},
    }


# -- entangled measurement records --------------------------------------------------

def _amps(state):
    return np.asarray(getattr(state, "amplitudes", state), dtype=complex)


@dataclass(frozen=True, eq=False)
class JointBranchState:
    """``psi_a(x) |A> + psi_b(x) |B>``: an electron on a grid entangled with a discrete record.

    ``branch_a``/``branch_b`` are amplitude vectors (or states exposing
    ``.amplitudes``) of the remaining subsystems in the preferred basis.
    """

    psi_a: WaveField
    psi_b: WaveField
    branch_a: object
    branch_b: object
    names: tuple = ("smile", "frown")

    def amplitude(self) -> np.ndarray:
        """Joint amplitude on (grid point, discrete label)."""
        return (np.outer(self.psi_a.psi, _amps(self.branch_a))
                + np.outer(self.psi_b.psi, _amps(self.branch_b)))

    def density(self) -> np.ndarray:
        return np.abs(self.amplitude()) ** 2

    def branch_densities(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.outer(np.abs(self.psi_a.psi) ** 2, np.abs(_amps(self.branch_a)) ** 2)
        b = np.outer(np.abs(self.psi_b.psi) ** 2, np.abs(_amps(self.branch_b)) ** 2)
        return a, b

    def support_overlap(self) -> float:
        return float(trapezoid(np.abs(self.psi_a.psi) * np.abs(self.psi_b.psi), self.psi_a.grid.dx))

    def label_at(self, x_index) -> np.ndarray:
        """0 where the electron sits in the support of ``psi_a``, else 1."""
        a = np.abs(self.psi_a.psi[x_index])
        b = np.abs(self.psi_b.psi[x_index])
        return np.where(a >= b, 0, 1)


@dataclass(frozen=True)
class BranchOccupancy:
    branch_label: str
    electron_position: float
    time: float


def _require_disjoint(joint: JointBranchState, tol: float = 1e-10):
    ov = joint.support_overlap()
    if ov >= tol:
        raise BranchesOverlap(f"branch supports overlap ({ov:.3g} >= {tol:g})")


def branch_occupancy(joint: JointBranchState, electron_position: float) -> BranchOccupancy:
    """Which branch the configuration occupies, decided by the electron's position alone."""
    _require_disjoint(joint)
    g = joint.psi_a.grid
    i = int(np.clip(np.rint((electron_position - g.x_min) / g.dx), 0, g.n_points - 1))
    label = int(joint.label_at(i))
    return BranchOccupancy(joint.names[label], float(electron_position), joint.psi_a.t)


def occupancy_check(joint: JointBranchState, n_samples: int, seed: int) -> dict:
    """Sample the joint Born density and test the conditional branch structure.

    Checks that the joint density equals the sum of the two product terms
    pointwise, that lobe frequencies follow the branch weights, and that the
    record distribution conditioned on the lobe is that branch's own density.
    """
    _require_disjoint(joint)
    dens = joint.density()
    da, db = joint.branch_densities()
    factor_gap = float(np.max(np.abs(dens - (da + db))))
    nx, nd = dens.shape
    idx = draw(dens.ravel() / dens.sum(), rng.stream(seed), n_samples)
    xi, si = np.divmod(idx, nd)
    labels = joint.label_at(xi)
    report = {"n": n_samples, "max_factorization_gap": factor_gap, "branches": {}}
    for lab, amps in ((0, joint.branch_a), (1, joint.branch_b)):
        sel = labels == lab
        p = np.abs(_amps(amps)) ** 2
        weight = float(da.sum() / dens.sum()) if lab == 0 else float(db.sum() / dens.sum())
        counts = np.bincount(si[sel], minlength=nd)
        report["branches"][joint.names[lab]] = {
            "count": int(sel.sum()),
            "expected_fraction": weight,
            "conditional": chisquare_counts(counts, p),
        }
    return report
