"""Event-by-event polarization Bell tests with a hidden two-branch jump record.

Outcomes are sampled from the Born probabilities of the full pair state in
the rotated measurement basis. The hidden branch record (which of ``HH`` or
``VV`` is currently "full") is simulated alongside but never read by the
measurement sampler.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import UnsupportedState
from .hilbert import TensorState, polarizer_basis
from .jumper import JumpRecord, discrete_jump_process, draw

POL = ("H", "V")
# outcome index 0 is +1, index 1 is -1
SIGNS = np.array([1, -1])


def pair_state(amplitudes=(1, 0, 0, 1)) -> TensorState:
    """Pair state over ``HH, HV, VH, VV`` (normalized)."""
    return TensorState((2, 2), (POL, POL), amplitudes, ("photon1", "photon2")).normalize()


def bell_state() -> TensorState:
    """``(|H>|H> + |V>|V>)/sqrt 2``."""
    return pair_state((1, 0, 0, 1))


@dataclass(frozen=True)
class BellSettings:
    angle_a: float = 0.0
    angle_a2: float = np.pi / 4
    angle_b: float = np.pi / 8
    angle_b2: float = 3 * np.pi / 8
    n_trials: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")

    def pairs(self):
        """The four (a, b) setting pairs in CHSH order with their signs."""
        return [(self.angle_a, self.angle_b, 1), (self.angle_a, self.angle_b2, -1),
                (self.angle_a2, self.angle_b, 1), (self.angle_a2, self.angle_b2, 1)]


def outcome_probabilities(state: TensorState, angle_a: float, angle_b: float) -> np.ndarray:
    """``P[i, j]`` for Alice outcome ``SIGNS[i]`` and Bob outcome ``SIGNS[j]``."""
    ua, ub = polarizer_basis(angle_a), polarizer_basis(angle_b)
    amp = ua.T @ state.amplitudes.reshape(2, 2) @ ub
    p = np.abs(amp) ** 2
    return p / p.sum()


def exact_correlation(state: TensorState, angle_a: float, angle_b: float) -> float:
    p = outcome_probabilities(state, angle_a, angle_b)
    return float(np.einsum("i,j,ij->", SIGNS, SIGNS, p))


def measure_pair(state: TensorState, angle_a: float, angle_b: float, seed: int,
                 n: int = 1, key: int = 0) -> np.ndarray:
    """``n`` outcome pairs ``(+-1, +-1)`` drawn from the Born probabilities.

    Trials come in fixed batches; batch ``b`` uses stream ``(seed, key, b)``.
    """
    p = outcome_probabilities(state, angle_a, angle_b).ravel()
    idx = rng.batched(seed, n, lambda g, size: draw(p, g, size), key).astype(int)
    return np.column_stack([SIGNS[idx // 2], SIGNS[idx % 2]])


def correlation(outcomes: np.ndarray) -> tuple[float, float]:
    """Mean product and its standard error."""
    prod = outcomes[:, 0] * outcomes[:, 1]
    n = len(prod)
    e = float(prod.mean())
    se = float(np.sqrt(max(1 - e**2, 0.0) / n)) if n > 1 else float("inf")
    return e, se


def counts(outcomes: np.ndarray) -> dict:
    a, b = outcomes[:, 0], outcomes[:, 1]
    return {"pp": int(((a == 1) & (b == 1)).sum()), "pm": int(((a == 1) & (b == -1)).sum()),
            "mp": int(((a == -1) & (b == 1)).sum()), "mm": int(((a == -1) & (b == -1)).sum())}


def _combine(results) -> dict:
    s = sum(sign * e for (_, _, sign), (e, _) in results)
    se = float(np.sqrt(sum(v**2 for _, (_, v) in results)))
    return {"S": float(s), "stderr": se, "ci95": [float(s - 1.96 * se), float(s + 1.96 * se)]}


def chsh(settings: BellSettings, state: TensorState | None = None, stream_key: int = 0) -> dict:
    """CHSH ``S = E(a,b) - E(a,b') + E(a',b) + E(a',b')`` from sampled trials."""
    state = state if state is not None else bell_state()
    results, table = [], []
    for i, (a, b, sign) in enumerate(settings.pairs()):
        out = measure_pair(state, a, b, settings.seed, settings.n_trials, key=stream_key * 4 + i)
        e, se = correlation(out)
        results.append(((a, b, sign), (e, se)))
        table.append({"setting": i, "angle_a": a, "angle_b": b, "E": e, "stderr": se, **counts(out)})
    report = _combine(results)
    report["settings"] = table
    report["n_trials"] = settings.n_trials
    return report


def exact_chsh(settings: BellSettings, state: TensorState | None = None) -> float:
    state = state if state is not None else bell_state()
    return float(sum(sign * exact_correlation(state, a, b) for a, b, sign in settings.pairs()))


def lhv_response(angle: float, hidden: np.ndarray) -> np.ndarray:
    """Deterministic local response: +1 when the hidden polarization is within 45 deg of the axis."""
    return np.where(np.cos(2 * (angle - hidden)) >= 0, 1, -1)


def lhv_chsh(settings: BellSettings) -> dict:
    """CHSH for a local model: each pair carries a uniform hidden angle read by both sides."""
    results, table = [], []
    for i, (a, b, sign) in enumerate(settings.pairs()):
        lam = rng.batched(settings.seed, settings.n_trials,
                          lambda g, size: g.uniform(0, np.pi, size), 99, i)
        out = np.column_stack([lhv_response(a, lam), lhv_response(b, lam)])
        e, se = correlation(out)
        results.append(((a, b, sign), (e, se)))
        table.append({"setting": i, "angle_a": a, "angle_b": b, "E": e, "stderr": se})
    report = _combine(results)
    report["settings"] = table
    return report


def lhv_exact_correlation(angle_a: float, angle_b: float, n_hidden: int = 1 << 16) -> float:
    """Correlation of the local model by quadrature over hidden angles."""
    lam = (np.arange(n_hidden) + 0.5) * np.pi / n_hidden
    return float(np.mean(lhv_response(angle_a, lam) * lhv_response(angle_b, lam)))


def _in_basis(state: TensorState, theta: float) -> np.ndarray:
    u = polarizer_basis(theta)
    return u.T @ state.amplitudes.reshape(2, 2) @ u


def branch_weights(state: TensorState, basis_angle: float = 0.0, tol: float = 1e-12) -> np.ndarray:
    """Born weights of the two diagonal branches in the preferred basis."""
    amp = _in_basis(state, basis_angle)
    if abs(amp[0, 1]) > tol or abs(amp[1, 0]) > tol:
        raise UnsupportedState("state has support on HV/VH in the preferred basis")
    w = np.abs(np.array([amp[0, 0], amp[1, 1]])) ** 2
    return w / w.sum()


def pair_jump_process(state: TensorState, rate: float, duration: float, seed: int,
                      basis_angle: float = 0.0, run: int = 0) -> JumpRecord:
    """Hidden branch record over ``HH``/``VV``, Poisson-timed with Born weights."""
    w = branch_weights(state, basis_angle)
    return discrete_jump_process(w, rate, duration, seed, labels=("HH", "VV"), run=run)


def hidden_branches(state: TensorState, n: int, rate: float, duration: float, seed: int,
                    basis_select=None) -> tuple[np.ndarray, np.ndarray]:
    """Branch occupied at detection, and the number of jumps since emission, for each trial.

    ``basis_select(i)`` returns the preferred-basis angle for pair ``i``
    (default: the H/V basis for every pair).
    """
    if basis_select is None:
        w = branch_weights(state, 0.0)
        jumps = rng.batched(seed, n, lambda g, size: g.poisson(rate * duration, size), 7, 0)
        label = rng.batched(seed, n, lambda g, size: draw(w, g, size), 7, 1)
        return label.astype(int), jumps.astype(int)
    label = np.empty(n, dtype=int)
    jumps = np.empty(n, dtype=int)
    for i in range(n):
        rec = pair_jump_process(state, rate, duration, seed, basis_select(i), run=i)
        label[i], jumps[i] = rec.values[-1], rec.n_jumps
    return label, jumps


def hiddenness_check(settings: BellSettings, state: TensorState | None = None, rate: float = 10.0,
                     duration: float = 1.0, basis_select=None) -> dict:
    """CHSH with and without a running hidden jump process, on independent streams.

    The measurement sampler takes no input from the jump record, so the two
    estimates differ only by sampling noise.
    """
    state = state if state is not None else bell_state()
    without = chsh(settings, state, stream_key=0)
    hidden = []
    for i in range(4):
        lab, _ = hidden_branches(state, settings.n_trials, rate, duration,
                                 settings.seed * 4 + i + 1, basis_select)
        hidden.append(lab)
    with_jump = chsh(settings, state, stream_key=1)
    se = float(np.hypot(without["stderr"], with_jump["stderr"]))
    diff = abs(with_jump["S"] - without["S"])
    insufficient = settings.n_trials < 2 or not np.isfinite(se)
    hh = float(np.mean(np.concatenate(hidden) == 0))
    return {
        "S_without": without["S"],
        "S_with": with_jump["S"],
        "combined_stderr": se,
        "difference": diff,
        "z": diff / se if se > 0 and np.isfinite(se) else float("nan"),
        "passes": (not insufficient) and diff <= 3 * se,
        "insufficient_statistics": insufficient,
        "hidden_HH_fraction": hh,
    }
