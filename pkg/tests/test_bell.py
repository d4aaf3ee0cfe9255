import itertools

import numpy as np
import pytest

from interp_lab.bell import (BellSettings, bell_state, chsh, correlation, exact_chsh,
                             exact_correlation, hidden_branches, hiddenness_check, lhv_chsh,
                             lhv_exact_correlation, measure_pair, outcome_probabilities,
                             pair_jump_process, pair_state)
from interp_lab.errors import UnsupportedState

OPTIMAL = dict(angle_a=0.0, angle_a2=np.pi / 4, angle_b=np.pi / 8, angle_b2=3 * np.pi / 8)


def enumerate_probabilities(amps, a, b):
    """Independent 4-outcome table: project onto each product of polarizer eigenvectors."""
    amps = np.asarray(amps, dtype=complex)
    amps = amps / np.linalg.norm(amps)
    vec = {1: lambda t: np.array([np.cos(t), np.sin(t)]), -1: lambda t: np.array([-np.sin(t), np.cos(t)])}
    return {(sa, sb): abs(np.vdot(np.kron(vec[sa](a), vec[sb](b)), amps)) ** 2
            for sa, sb in itertools.product((1, -1), repeat=2)}


def test_probability_table_matches_enumeration():
    for amps in [(1, 0, 0, 1), (0.3, 0.1j, -0.5, 0.8), (1, 0, 0, 0)]:
        st = pair_state(amps)
        for a, b in [(0, 0), (0.3, -1.1), (np.pi / 8, 2.0)]:
            p = outcome_probabilities(st, a, b)
            ref = enumerate_probabilities(amps, a, b)
            for (i, sa), (j, sb) in itertools.product(enumerate((1, -1)), repeat=2):
                assert p[i, j] == pytest.approx(ref[(sa, sb)], abs=1e-15)


def test_born_table_for_bell_state():
    a, b = 0.4, 1.3
    p = outcome_probabilities(bell_state(), a, b)
    assert p[0, 0] == pytest.approx(np.cos(a - b) ** 2 / 2) == pytest.approx(p[1, 1])
    assert p[0, 1] == pytest.approx(np.sin(a - b) ** 2 / 2) == pytest.approx(p[1, 0])


def test_equal_angles_perfect_correlation():
    out = measure_pair(bell_state(), 0.7, 0.7, seed=1, n=20000)
    assert np.all(out[:, 0] == out[:, 1])
    assert correlation(out)[0] == 1.0
    assert exact_correlation(bell_state(), 0.7, 0.7) == pytest.approx(1.0)


def test_quarter_pi_uncorrelated():
    n = 10**5
    e, _ = correlation(measure_pair(bell_state(), 0.0, np.pi / 4, seed=3, n=n))
    assert abs(e) <= 4 / np.sqrt(n)


def test_product_state_always_plus():
    out = measure_pair(pair_state((1, 0, 0, 0)), 0.0, 0.0, seed=5, n=5000)
    assert np.all(out == 1)


def test_chsh_optimal():
    rep = chsh(BellSettings(**OPTIMAL, n_trials=10**6, seed=2024))
    assert abs(rep["S"] - 2 * np.sqrt(2)) <= 0.01
    assert rep["ci95"][0] < rep["S"] < rep["ci95"][1]
    assert exact_chsh(BellSettings(**OPTIMAL)) == pytest.approx(2 * np.sqrt(2), abs=1e-14)


def test_degenerate_settings():
    s = BellSettings(angle_a=0.2, angle_a2=0.2, angle_b=0.9, angle_b2=0.9, n_trials=20000, seed=4)
    rep = chsh(s)
    assert -2 <= rep["S"] <= 2
    assert exact_chsh(s) == pytest.approx(2 * exact_correlation(bell_state(), 0.2, 0.9), abs=1e-14)
    assert abs(rep["S"] - exact_chsh(s)) <= 4 * rep["stderr"]


def _lhv_oracle(a, b, n=200_000):
    # brute force over hidden angles on a fine independent grid
    lam = np.linspace(0, np.pi, n, endpoint=False)
    ra = np.sign(np.cos(2 * (a - lam)) + 1e-300)
    rb = np.sign(np.cos(2 * (b - lam)) + 1e-300)
    return float(np.mean(ra * rb))


def test_lhv_baseline():
    s = BellSettings(**OPTIMAL, n_trials=2 * 10**5, seed=9)
    rep = lhv_chsh(s)
    assert rep["S"] <= 2 + 4 * rep["stderr"]
    exact = sum(sign * _lhv_oracle(a, b) for a, b, sign in s.pairs())
    assert exact == pytest.approx(2.0, abs=1e-4)
    for a, b, _ in s.pairs():
        assert lhv_exact_correlation(a, b) == pytest.approx(_lhv_oracle(a, b), abs=1e-4)
    # the local model never exceeds the Bell bound over a sweep of settings
    gen = np.random.default_rng(0)
    for _ in range(50):
        ang = gen.uniform(0, np.pi, 4)
        pairs = [(ang[0], ang[2], 1), (ang[0], ang[3], -1), (ang[1], ang[2], 1), (ang[1], ang[3], 1)]
        assert abs(sum(sg * lhv_exact_correlation(a, b, 1 << 14) for a, b, sg in pairs)) <= 2 + 1e-9


def test_hiddenness_bell_state():
    rep = hiddenness_check(BellSettings(**OPTIMAL, n_trials=10**5, seed=7))
    assert rep["passes"] and not rep["insufficient_statistics"]
    assert rep["difference"] < 3 * rep["combined_stderr"]
    assert abs(rep["hidden_HH_fraction"] - 0.5) < 4 * np.sqrt(0.25 / (4 * 10**5))


def test_hiddenness_product_state():
    hh = pair_state((1, 0, 0, 0))
    rep = hiddenness_check(BellSettings(**OPTIMAL, n_trials=10**5, seed=8), hh)
    # enumeration: E(a, b) = cos 2a cos 2b for |HH>, so S = sqrt 2 at these angles
    target = sum(sign * np.cos(2 * a) * np.cos(2 * b) for a, b, sign in BellSettings(**OPTIMAL).pairs())
    assert target == pytest.approx(np.sqrt(2))
    for key in ("S_with", "S_without"):
        assert rep[key] == pytest.approx(target, abs=4 * rep["combined_stderr"])
    assert rep["hidden_HH_fraction"] == 1.0


def test_hiddenness_single_trial_flagged():
    rep = hiddenness_check(BellSettings(**OPTIMAL, n_trials=1, seed=0))
    assert rep["insufficient_statistics"] and not rep["passes"]


def test_pair_jump_process_weights():
    rec = pair_jump_process(bell_state(), rate=10**5, duration=1.0, seed=1)
    n = len(rec)
    assert n > 99_000
    frac = np.mean(rec.values == 0)
    assert abs(frac - 0.5) <= 4 * np.sqrt(0.25 / n)
    skew = pair_state((np.sqrt(0.1), 0, 0, np.sqrt(0.9)))
    rec = pair_jump_process(skew, rate=10**5, duration=1.0, seed=2)
    frac = np.mean(rec.values == 0)
    assert abs(frac - 0.1) <= 4 * np.sqrt(0.09 / len(rec))
    rec = pair_jump_process(pair_state((1, 0, 0, 0)), rate=1000, duration=1.0, seed=3)
    assert set(rec.value_names()) == {"HH"}
    with pytest.raises(UnsupportedState):
        pair_jump_process(pair_state((1, 1, 0, 1)), rate=1, duration=1, seed=0)


def test_per_pair_basis_choice():
    lab, jumps = hidden_branches(bell_state(), 2000, 5.0, 1.0, seed=4,
                                 basis_select=lambda i: 0.0 if i % 2 else np.pi / 4)
    assert abs(lab.mean() - 0.5) < 4 * np.sqrt(0.25 / 2000)
    assert abs(jumps.mean() - 5.0) < 4 * np.sqrt(5.0 / 2000)


def test_correlation_sweep_and_no_signaling():
    n = 40_000
    st = bell_state()
    marginals = []
    for i, b in enumerate(np.linspace(0, np.pi, 10)):
        out = measure_pair(st, 0.0, b, seed=100, n=n, key=i)
        e, _ = correlation(out)
        assert abs(e - np.cos(2 * (0.0 - b))) <= 4 / np.sqrt(n)
        marginals.append(np.mean(out[:, 0] == 1))
    sigma = np.sqrt(0.25 / n)
    assert max(abs(m - 0.5) for m in marginals) <= 4 * sigma
    assert max(marginals) - min(marginals) <= 4 * np.sqrt(2) * sigma


def test_prefix_stability():
    a = measure_pair(bell_state(), 0.1, 0.5, seed=6, n=1000)
    b = measure_pair(bell_state(), 0.1, 0.5, seed=6, n=100_000)
    assert np.array_equal(a, b[:1000])


def test_settings_validation():
    with pytest.raises(ValueError):
        BellSettings(n_trials=0)
