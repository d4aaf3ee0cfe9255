"""Branch bookkeeping for ``N`` repetitions of a two-outcome (Bernoulli) split.

Two measures over the ``2**N`` branches are compared: the counting measure
(every branch weighs ``2**-N``) and the Born measure (a branch with ``n_t``
transmissions weighs ``p**n_t (1-p)**(N-n_t)``).
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.special import gammaln, logsumexp

from . import rng
from .errors import OutOfRange
from .stats import chisquare_counts

EXACT_LIMIT = 500


def branch_count(N: int, n_t: int) -> int:
    """Number of branches with exactly ``n_t`` transmissions (exact integer)."""
    if not 0 <= n_t <= N:
        raise OutOfRange(f"n_t={n_t} outside [0, {N}]")
    return math.comb(N, n_t)


def _exact(p) -> Fraction:
    return p if isinstance(p, Fraction) else Fraction(str(p))


def log_born_weights(N: int, p: float) -> np.ndarray:
    """``log(W(n) p^n (1-p)^(N-n))`` for ``n = 0..N``.

    Anchored at the mode with an exact big-integer ``log W`` and extended by
    cumulative log ratios, which keeps the absolute error near ``1e-13`` where
    plain log-gamma differences lose several digits at large ``N``.
    """
    if N > 10**6:
        n = np.arange(N + 1)
        with np.errstate(divide="ignore"):
            return (gammaln(N + 1) - gammaln(n + 1) - gammaln(N - n + 1)
                    + n * np.log(p) + (N - n) * np.log1p(-p))
    lp, lq = math.log(p), math.log1p(-p)
    m = min(int((N + 1) * p), N)
    n = np.arange(N)
    ratio = np.log(N - n) - np.log(n + 1) + (lp - lq)
    out = np.empty(N + 1)
    out[m] = math.log(math.comb(N, m)) + m * lp + (N - m) * lq
    out[m + 1:] = out[m] + np.cumsum(ratio[m:])
    out[:m] = out[m] - np.cumsum(ratio[:m][::-1])[::-1]
    return out


def born_weights_exact(N: int, p) -> list[Fraction]:
    p = _exact(p)
    q = 1 - p
    return [math.comb(N, n) * p**n * q ** (N - n) for n in range(N + 1)]


def within(N: int, p, eps) -> np.ndarray:
    """Mask of ``n`` with ``|n/N - p| <= eps``, decided in exact arithmetic."""
    p, eps = _exact(p), _exact(eps)
    return np.array([abs(Fraction(n, N) - p) <= eps for n in range(N + 1)])


def born_measure_of_set(N: int, p, predicate, exact: bool | None = None) -> float:
    """Born measure of the branches whose transmission count satisfies ``predicate``.

    ``predicate`` is a callable on ``n_t`` or a boolean mask of length ``N+1``.
    Exact rational sums are used up to ``N = 500``, log-space sums beyond.
    """
    mask = _mask(N, predicate)
    if not mask.any():
        return 0.0
    if exact is None:
        exact = N <= EXACT_LIMIT
    if exact:
        w = born_weights_exact(N, p)
        return float(sum(wi for wi, m in zip(w, mask) if m))
    lw = log_born_weights(N, float(p))
    return float(np.exp(logsumexp(lw[mask])))


def counting_measure_of_set(N: int, predicate, exact: bool | None = None) -> float:
    mask = _mask(N, predicate)
    if not mask.any():
        return 0.0
    if exact is None:
        exact = N <= EXACT_LIMIT
    if exact:
        return float(Fraction(sum(math.comb(N, n) for n in np.flatnonzero(mask)), 2**N))
    n = np.arange(N + 1)
    lw = gammaln(N + 1) - gammaln(n + 1) - gammaln(N - n + 1) - N * np.log(2)
    return float(np.exp(logsumexp(lw[mask])))


def _mask(N: int, predicate) -> np.ndarray:
    if callable(predicate):
        return np.array([bool(predicate(n)) for n in range(N + 1)])
    mask = np.asarray(predicate, dtype=bool)
    if mask.shape != (N + 1,):
        raise ValueError(f"mask must have length N+1 = {N + 1}")
    return mask


def counting_vs_born(N: int, p, eps) -> dict:
    """Both measures of the Born-typical set ``{|n_t/N - p| <= eps}``."""
    if not 0 < float(p) < 1 or not float(eps) > 0:
        raise ValueError("need 0 < p < 1 and eps > 0")
    mask = within(N, p, eps)
    return {
        "N": N, "p": float(p), "eps": float(eps),
        "born_measure": born_measure_of_set(N, p, mask),
        "counting_measure": counting_measure_of_set(N, mask),
        "counting_argmax": int(np.argmax([math.comb(N, n) for n in range(N + 1)])) if N <= EXACT_LIMIT
        else N // 2,
    }


def log2_branch_count(N: int, n_t: int) -> float:
    if N <= 10 * EXACT_LIMIT:
        return math.log2(branch_count(N, n_t))
    return float((gammaln(N + 1) - gammaln(n_t + 1) - gammaln(N - n_t + 1)) / np.log(2))


def stirling_typicality(N: int) -> dict:
    """``log W(N/2)`` against the crude ``N ln 2`` and the refined ``N ln 2 - ln(pi N/2)/2``."""
    if N < 10:
        raise ValueError("N must be >= 10")
    exact = log2_branch_count(N, N // 2)
    crude = float(N)
    refined = N - 0.5 * math.log2(math.pi * N / 2)
    return {
        "N": N,
        "log2_W_exact": exact,
        "log2_W_crude": crude,
        "log2_W_refined": refined,
        "crude_relative_error": abs(crude - exact) / exact,
        "refined_relative_error": abs(refined - exact) / exact,
    }


def hoeffding_bound(N: int, eps: float) -> float:
    return 2 * math.exp(-2 * N * eps**2)


def distribution_table(N: int, p) -> list[dict]:
    """Rows ``(n_t, W, counting_fraction, born_weight)``."""
    exact = N <= EXACT_LIMIT
    born = born_weights_exact(N, p) if exact else np.exp(log_born_weights(N, float(p)))
    rows = []
    for n in range(N + 1):
        w = math.comb(N, n)
        frac = Fraction(w, 2**N) if exact else None
        rows.append({"n_t": n, "W": w,
                     "counting_fraction": float(frac) if exact else math.exp(
                         math.lgamma(N + 1) - math.lgamma(n + 1) - math.lgamma(N - n + 1) - N * math.log(2)),
                     "born_weight": float(born[n])})
    return rows


def empirical_branch_walk(N: int, p: float, n_runs: int, seed: int) -> dict:
    """Simulate ``n_runs`` sequences of ``N`` splits, one stream per run."""
    if n_runs < 0:
        raise ValueError("n_runs must be >= 0")
    if n_runs == 0:
        return {"N": N, "p": p, "n_runs": 0, "counts": [], "mean_fraction": None}
    n_t = np.array([int((rng.stream(seed, r).random(N) < p).sum()) for r in range(n_runs)])
    hist = np.bincount(n_t, minlength=N + 1)
    expected = np.exp(log_born_weights(N, p))
    frac = n_t / N
    return {
        "N": N, "p": p, "n_runs": n_runs,
        "counts": hist.tolist(),
        "mean_fraction": float(frac.mean()),
        "stderr_fraction": float(np.sqrt(p * (1 - p) / (N * n_runs))),
        "chisquare": chisquare_counts(hist, expected),
    }
