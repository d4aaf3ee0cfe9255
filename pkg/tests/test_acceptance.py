"""Headline acceptance criteria; each test prints and records one PASS/FAIL line."""
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from interp_lab import bohm, branches, hilbert, states, tdse
from interp_lab.cli import config as cfgmod
from interp_lab.cli import runner
from interp_lab.field import Grid, continuity_residual
from interp_lab.potentials import PotentialSpec


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def _refinement_orders(name: str) -> tuple[list, list]:
    base = json.loads(cfgmod.gallery()[name].read_text())
    residuals, drifts = [], []
    for lev in range(3):
        c = json.loads(json.dumps(base))
        c["grid"]["n_points"] = 1024 * 2**lev
        c["solver"]["dt"] = base["solver"]["dt"] / 2**lev
        c["solver"]["n_steps"] = base["solver"]["n_steps"] * 2**lev
        c["solver"]["output_every"] = c["solver"]["n_steps"]
        run = runner.propagate(c)
        nxt = tdse.step(run.final, run.potential, run.config)
        residuals.append(continuity_residual(run.final, nxt))
        drifts.append(run.norm_drift)
    orders = [math.log2(residuals[i] / residuals[i + 1]) for i in range(2)]
    return orders, drifts


def test_criterion_1_unitarity_and_continuity(gallery_runs):
    parts, ok = [], True
    for name in ("free_gaussian", "harmonic"):
        _, manifest, summary = gallery_runs[name]
        conf = manifest["config"]
        shape_ok = (conf["grid"]["n_points"] == 1024 and conf["solver"]["dt"] == 1e-3
                    and conf["solver"]["n_steps"] == 10_000)
        orders, drifts = _refinement_orders(name)
        this = (shape_ok and summary["norm_drift"] <= 1e-8 and max(drifts) <= 1e-8
                and min(orders) >= 1.8 and manifest["wall_time_s"] <= 30)
        ok &= this
        parts.append(f"{name}: drift {summary['norm_drift']:.1e}, orders "
                     f"{orders[0]:.2f}/{orders[1]:.2f}, {manifest['wall_time_s']:.1f}s")
    record(1, ok, "; ".join(parts))
    assert ok


def test_criterion_2_bohm_equivariance(gallery_runs):
    _, manifest, summary = gallery_runs["double_slit"]
    eq = summary["equivariance"]
    ok = (manifest["config"]["bohm"]["n"] == 10_000 and eq["n"] == 10_000 and eq["p_value"] > 0.01
          and eq["t"] == pytest.approx(summary["t_final"]) and manifest["wall_time_s"] <= 120)
    record(2, ok, f"KS D {eq['ks_statistic']:.4f} p {eq['p_value']:.3f} n {eq['n']}, "
                  f"{manifest['wall_time_s']:.1f}s")
    assert ok


def test_criterion_3_stationary_pilot_wave(gallery_runs):
    _, manifest, summary = gallery_runs["harmonic_ground_bohm"]
    pot = PotentialSpec("harmonic", {"omega": 1.0})
    errs, dxs = [], []
    for n in (501, 1001, 2001):
        g = Grid(-10, 10, n)
        f = states.harmonic_ground_state(g)
        inner = np.abs(g.x) <= 2.5
        qv = bohm.quantum_potential(f, g.x[inner]) + pot.evaluate(g)[inner]
        errs.append(float(np.max(np.abs(qv - 0.5))))
        dxs.append(g.dx)
    orders = [math.log(errs[i] / errs[i + 1]) / math.log(dxs[i] / dxs[i + 1]) for i in range(2)]
    ok = (summary["max_displacement"] <= 1e-8 and min(orders) >= 1.8 and max(orders) <= 2.2
          and manifest["wall_time_s"] <= 10)
    record(3, ok, f"max displacement {summary['max_displacement']:.1e}, |Q+V-1/2| "
                  f"{errs[0]:.1e}/{errs[1]:.1e}/{errs[2]:.1e} orders {orders[0]:.2f}/{orders[1]:.2f}, "
                  f"{manifest['wall_time_s']:.1f}s")
    assert ok


def test_criterion_4_jumper_born_marginal(gallery_runs):
    parts, ok = [], True
    for name in ("beam_splitter_position", "beam_splitter_momentum"):
        _, manifest, summary = gallery_runs[name]
        bm = summary["born_marginal"]
        this = (bm["n"] == 100_000 and bm["p_value"] > 0.01 and bm["outside_support"] == 0
                and summary["parseval_gap"] <= 1e-10 and manifest["wall_time_s"] <= 60)
        ok &= this
        parts.append(f"{manifest['config']['jump']['basis']}: chi2 p {bm['p_value']:.3f}, "
                     f"Parseval {summary['parseval_gap']:.1e}, {manifest['wall_time_s']:.1f}s")
    record(4, ok, "; ".join(parts))
    assert ok


def test_criterion_5_disjoint_support_factorization(gallery_runs):
    _, manifest, summary = gallery_runs["measurement_chain"]
    occ = summary["occupancy"]
    pvals = {k: v["conditional"]["p_value"] for k, v in occ["branches"].items()}
    ok = (summary["support_overlap"] < 1e-10 and occ["n"] == 100_000 and min(pvals.values()) > 0.01
          and occ["max_factorization_gap"] <= 1e-12)
    record(5, ok, f"overlap {summary['support_overlap']:.1e}, conditional p "
                  + ", ".join(f"{k} {v:.3f}" for k, v in sorted(pvals.items()))
                  + f", gap {occ['max_factorization_gap']:.1e}")
    assert ok


def test_criterion_6_chsh(gallery_runs):
    _, manifest, s = gallery_runs["bell_chsh"]
    ang = manifest["config"]["bell"]["angles"]
    optimal = np.allclose(ang, [0, np.pi / 4, np.pi / 8, 3 * np.pi / 8])
    ok = (optimal and s["n_trials"] == 10**6 and abs(s["S"] - 2 * math.sqrt(2)) <= 0.01
          and s["S_lhv"] <= 2 + 3 * s["S_lhv_stderr"] and s["hiddenness"]["passes"]
          and manifest["wall_time_s"] <= 120)
    record(6, ok, f"S {s['S']:.5f} +- {s['stderr']:.5f}, LHV {s['S_lhv']:.4f} "
                  f"(sigma {s['S_lhv_stderr']:.4f}), hiddenness z {s['hiddenness']['z']:.2f}, "
                  f"{manifest['wall_time_s']:.1f}s")
    assert ok


def test_criterion_7_branch_statistics(gallery_runs):
    import time
    t0 = time.perf_counter()
    row = [1]
    pascal_ok = True
    for N in range(1, 501):
        row = [a + b for a, b in zip([0] + row, row + [0])]
        pascal_ok &= all(branches.branch_count(N, k) == row[k] for k in range(N + 1))
    p, eps = Fraction(9, 10), Fraction(1, 20)
    rep = branches.counting_vs_born(200, 0.9, 0.05)
    inside = [k for k in range(201) if abs(Fraction(k, 200) - p) <= eps]
    born_oracle = float(sum(math.comb(200, k) * p**k * (1 - p) ** (200 - k) for k in inside))
    count_oracle = float(Fraction(sum(math.comb(200, k) for k in inside), 2**200))
    oracle_ok = (rep["born_measure"] == pytest.approx(born_oracle, rel=1e-12)
                 and rep["counting_measure"] == pytest.approx(count_oracle, rel=1e-12))
    hoeff_ok = all(
        branches.born_measure_of_set(N, q, lambda n: abs(n / N - q) > e) <= branches.hoeffding_bound(N, e)
        for N in (10, 100, 200, 1000) for q in (0.1, 0.5, 0.9) for e in (0.02, 0.05, 0.1))
    elapsed = time.perf_counter() - t0
    cascade_wall = gallery_runs["beam_splitter_cascade"][1]["wall_time_s"]
    ok = (pascal_ok and oracle_ok and hoeff_ok and rep["born_measure"] > 0.98
          and rep["counting_measure"] < 1e-30 and elapsed + cascade_wall <= 10)
    record(7, ok, f"Pascal N<=500 {'ok' if pascal_ok else 'mismatch'}, Born {rep['born_measure']:.5f}, "
                  f"counting {rep['counting_measure']:.3e} (target < 1e-30), Hoeffding "
                  f"{'ok' if hoeff_ok else 'violated'}, {elapsed + cascade_wall:.1f}s")
    assert ok


def test_criterion_8_decoherence_and_rotations(gallery_runs):
    c = 0.9
    explicit = hilbert.explicit_decoherence_overlap(20, c)
    dec_ok = abs(explicit - c**20) <= 1e-12 and gallery_runs["decoherence_sweep"][2]["max_explicit_error"] <= 1e-12
    a, b = 0.6, 0.8j
    r2 = math.sqrt(0.5)
    me = hilbert.observer_state((a, b))
    cat = hilbert.rotate_basis(me, hilbert.cat_rotation("Me"))
    single = {("'", "cat+"): a * r2, ("'", "cat-"): a * r2, ("''", "cat+"): b * r2, ("''", "cat-"): -b * r2}
    single_ok = all(abs(cat.amplitude(k) - v) <= 1e-15 for k, v in single.items())
    back = hilbert.rotate_basis(cat, hilbert.cat_rotation("Me").inverse(me.labels[1]))
    round_trip = float(np.max(np.abs(back.amplitudes - me.amplitudes)))
    two = hilbert.observer_state((a, b), ("Me", "You"))
    joint = hilbert.rotate_basis(two, hilbert.joint_cat_rotation(1))
    joint_form = {("'", "cat+"): a * r2, ("'", "cat-"): a * r2, ("''", "cat+"): b * r2, ("''", "cat-"): -b * r2}
    joint_ok = all(abs(joint.amplitude(k) - v) <= 1e-15 for k, v in joint_form.items())
    you = hilbert.rotate_basis(two, hilbert.cat_rotation("You"))
    you_form = {("'", "smile", "cat+"): a * r2, ("'", "smile", "cat-"): a * r2,
            ("''", "frown", "cat+"): b * r2, ("''", "frown", "cat-"): -b * r2}
    you_ok = (all(abs(you.amplitude(k) - v) <= 1e-15 for k, v in you_form.items())
               and sum(abs(v) ** 2 for _, v in you.kets(1e-15)) == pytest.approx(1.0, abs=1e-15)
               and len(list(you.kets(1e-15))) == 4)
    ok = dec_ok and single_ok and joint_ok and you_ok and round_trip <= 1e-12
    record(8, ok, f"|overlap - c^20| {abs(explicit - c**20):.1e}, cat forms "
                  f"{'exact' if single_ok and joint_ok and you_ok else 'wrong'}, round trip {round_trip:.1e}")
    assert ok


def test_criterion_9_determinism(gallery_runs, tmp_path):
    differing = {}
    for name, (_, manifest, _) in sorted(gallery_runs.items()):
        again = runner.execute(manifest["config"], tmp_path / name)
        m2 = json.loads((again / "manifest.json").read_text())
        # every written artifact (CSV, JSON state dumps, summary); the manifest itself carries wall time
        data_a, data_b = manifest["files"], m2["files"]
        if data_a != data_b or not data_a:
            differing[name] = sorted(k for k in set(data_a) | set(data_b) if data_a.get(k) != data_b.get(k))
    ok = not differing
    record(9, ok, f"{len(gallery_runs)} gallery configs rerun, "
                  + ("all data files byte-identical" if ok else f"differences: {differing}"))
    assert ok
