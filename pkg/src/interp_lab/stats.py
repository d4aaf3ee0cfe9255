"""Goodness-of-fit helpers shared by the samplers."""
from __future__ import annotations

import numpy as np
from scipy import stats


def pool_bins(expected: np.ndarray, min_expected: float = 5.0) -> np.ndarray:
    """Group consecutive bins so that every group expects at least ``min_expected`` counts.

    Returns a group id per input bin.
    """
    expected = np.asarray(expected, dtype=float)
    groups = np.empty(expected.size, dtype=int)
    g, acc = 0, 0.0
    for i, e in enumerate(expected):
        groups[i] = g
        acc += e
        if acc >= min_expected:
            g += 1
            acc = 0.0
    # an unfinished last group (possibly all zeros) joins its neighbour
    if expected.size and groups[-1] == g and g > 0:
        groups[groups == g] = g - 1
    return groups


def chisquare_counts(counts, probs, min_expected: float = 5.0) -> dict:
    """Pearson chi-square of ``counts`` against category probabilities ``probs``."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    probs = probs / probs.sum()
    n = counts.sum()
    outside = counts[probs <= 0].sum()
    groups = pool_bins(n * probs, min_expected)
    obs = np.bincount(groups, weights=counts)
    exp = np.bincount(groups, weights=n * probs)
    if obs.size < 2:
        return {"statistic": 0.0, "p_value": 1.0, "dof": 0, "n": int(n), "outside_support": int(outside)}
    res = stats.chisquare(obs, exp)
    return {"statistic": float(res.statistic), "p_value": float(res.pvalue),
            "dof": int(obs.size - 1), "n": int(n), "outside_support": int(outside)}


def binomial_sigma(n: int, p: float) -> float:
    return float(np.sqrt(n * p * (1 - p)))
