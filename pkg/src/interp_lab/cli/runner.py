"""Execute a validated experiment config and write its artifact directory."""
from __future__ import annotations

import hashlib
import json
import platform
import time
from pathlib import Path

import numpy as np
import scipy

from .. import __version__, bell, bohm, branches, hilbert, jumper, rng, states, tdse
from ..errors import IncompatibleRuns
from ..field import Grid, WaveField, continuity_residual, expectation_x, read_field, write_field
from ..potentials import PotentialSpec
from ..stats import chisquare_counts
from . import config as cfgmod

DATA_SUFFIXES = (".csv", ".json")


# -- writers -------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")
    return path


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- setup builders ---------------------------------------------------------------

def build_grid(c: dict) -> Grid:
    return Grid(float(c["x_min"]), float(c["x_max"]), int(c["n_points"]))


def build_potential(c: dict) -> PotentialSpec:
    params = {k: v for k, v in c.items() if k != "kind"}
    return PotentialSpec(c["kind"], params)


def build_solver(c: dict) -> tdse.SolverConfig:
    return tdse.SolverConfig(c["method"], float(c["dt"]), int(c["n_steps"]),
                             int(c.get("output_every", 1)), bool(c.get("strict", False)))


def build_initial(c: dict, grid: Grid, potential: PotentialSpec, solver: tdse.SolverConfig) -> WaveField:
    kind = c["kind"]
    if kind == "gaussian":
        return states.gaussian(grid, c.get("x0", 0.0), c.get("sigma", 1.0), c.get("k0", 0.0))
    if kind == "harmonic_ground":
        return states.harmonic_ground_state(grid, c.get("omega", 1.0), c.get("center", 0.0),
                                            c.get("displacement", 0.0))
    if kind == "stationary":
        return states.stationary_state(grid, potential, c.get("level", 0), solver.method)[0]
    if kind == "plane_wave":
        return states.plane_wave(grid, c.get("k", 0.0))
    return states.two_lobe(grid, c.get("separation", 4.0), c.get("weights", (0.5, 0.5)),
                           c.get("sigma", 1.0), c.get("k0", 0.0))


def propagate(config: dict) -> tdse.RunResult:
    grid = build_grid(config["grid"])
    potential = build_potential(config["potential"])
    solver = build_solver(config["solver"])
    initial = build_initial(config["initial_state"], grid, potential, solver)
    return tdse.run_experiment(initial, potential, solver)


# -- kinds ----------------------------------------------------------------------

def _write_snapshots(run: tdse.RunResult, out: Path, outputs: dict) -> list[Path]:
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    files = []
    stride = outputs.get("snapshot_stride")
    if outputs.get("snapshots", True) and stride:
        for i in range(0, len(run), stride):
            files += write_field(run[i], snap_dir / f"snapshot_{i:05d}")
    files += write_field(run[0], snap_dir / "initial")
    files += write_field(run.final, snap_dir / "final")
    rows = []
    for i, s in enumerate(run):
        mean, var = expectation_x(s)
        rows.append((i, s.t, s.norm() ** 2, mean, np.sqrt(var)))
    files.append(write_csv(snap_dir / "moments.csv", ("index", "t", "norm2", "mean_x", "width"), rows))
    return files


def _solve_summary(run: tdse.RunResult, config: dict) -> dict:
    solver = run.config
    potential = run.potential if run.potential.kind != "double_slit" else PotentialSpec("free")
    first = run[0]
    one = tdse.step(first, potential, tdse.SolverConfig(solver.method, solver.dt, 1))
    mean, var = expectation_x(run.final)
    return {
        "n_snapshots": len(run),
        "t_final": run.final.t,
        "norm_drift": run.norm_drift,
        "max_boundary_leak": run.max_boundary_leak,
        "continuity_residual_t0": continuity_residual(first, one),
        "energy_initial": tdse.energy(first, potential, solver.method),
        "energy_final": tdse.energy(run.final, potential, solver.method),
        "mean_x_final": mean,
        "width_final": float(np.sqrt(var)),
        **{k: v for k, v in run.info.items()},
    }


def run_solve(config: dict, out: Path, run: tdse.RunResult | None = None):
    run = run or propagate(config)
    outputs = config.get("outputs", {})
    files = _write_snapshots(run, out, outputs)
    summary = _solve_summary(run, config)
    split = outputs.get("branch_split")
    if split is not None:
        summary["branch_split"] = tdse.branch_split_check(
            run, further_time=split.get("further_time", 5.0),
            recombine_omega=split.get("recombine_omega"))
    return run, files, summary


def _final_positions_csv(out: Path, x0, xT, label: str) -> Path:
    rows = [(i, a, b) for i, (a, b) in enumerate(zip(x0, xT))]
    return write_csv(out / "final_positions.csv", ("id", "x_initial", f"x_final_{label}"), rows)


def _fit(positions: np.ndarray, field: WaveField, n_bins: int = 50) -> dict:
    """KS and near-equiprobable-bin chi-square of ``positions`` against ``|psi|^2``.

    Bin edges sit on cell midpoints so that samples drawn on grid points
    (jump runs) never straddle an edge.
    """
    pos = positions[np.isfinite(positions)]
    ks = bohm.ks_against_density(pos, field)
    cdf = bohm.density_cdf(field)
    x = field.x
    mids = 0.5 * (x[1:] + x[:-1])
    cm = cdf(mids)
    picks = np.unique(np.searchsorted(cm, np.linspace(0, 1, n_bins + 1)[1:-1]).clip(0, mids.size - 1))
    inner = mids[picks]
    probs = np.diff(np.concatenate([[0.0], cdf(inner), [1.0]]))
    counts = np.histogram(pos, np.concatenate([[-np.inf], inner, [np.inf]]))[0]
    chi = chisquare_counts(counts, probs)
    return {"n": int(pos.size), "ks_statistic": float(ks.statistic), "ks_p_value": float(ks.pvalue),
            "chi2_statistic": chi["statistic"], "chi2_p_value": chi["p_value"], "chi2_dof": chi["dof"]}


def run_bohm(config: dict, out: Path):
    run, files, summary = run_solve(config, out)
    opts = config["bohm"]
    seed = int(config["seed"])
    ens = bohm.run_ensemble(run, int(opts["n"]), seed, int(opts.get("substeps", 1)))
    n_show = min(int(config.get("outputs", {}).get("trajectories", 50)), ens.size)
    rows = []
    for i in range(n_show):
        for t, x in zip(ens.times, ens.positions[:, i]):
            rows.append((i, t, x))
    files.append(write_csv(out / "trajectories.csv", ("trajectory_id", "t", "x"), rows))
    xT = ens.positions[-1]
    files.append(_final_positions_csv(out, ens.initial, xT, "bohm"))
    eq = bohm.equivariance_check(ens, run, run.final.t)
    meta = {"seed": seed, "n": ens.size, "experiment_hash": cfgmod.setup_hash(config),
            "n_written": n_show, "truncated": int(ens.truncated.sum())}
    files.append(write_json(out / "trajectories.json", meta))
    summary["equivariance"] = eq
    summary["crossings"] = bohm.crossings(ens)
    summary["fit"] = _fit(xT, run.final)
    summary["truncated"] = meta["truncated"]
    if run.potential.kind in ("harmonic",) and config["initial_state"]["kind"] == "stationary":
        disp = np.nanmax(np.abs(ens.positions - ens.initial[None, :]))
        summary["max_displacement"] = float(disp)
    return files, summary


def run_jump(config: dict, out: Path):
    run, files, summary = run_solve(config, out)
    opts = config["jump"]
    seed = int(config["seed"])
    basis = opts.get("basis", "position")
    proc = jumper.JumpProcess(basis, float(opts.get("rate", 10.0)), seed)
    record = jumper.run_jump_process(run, proc)
    files.append(write_csv(out / "jump_record.csv", ("t", "value", "basis"),
                           [(t, v, basis) for t, v in zip(record.times, record.values)]))
    n_runs = int(opts.get("n_runs", 10_000))
    finals = jumper.final_configurations(run, proc, n_runs)
    if basis == "position":
        x0 = np.full(n_runs, np.nan)
        files.append(_final_positions_csv(out, x0, finals, "jump"))
    else:
        files.append(write_csv(out / "final_momenta.csv", ("id", "k_final_jump"), enumerate(finals)))
    n_samples = int(opts.get("n_samples", 100_000))
    support, w = jumper.born_weights(run.final, basis)
    idx = rng.batched(seed, n_samples, lambda g, size: jumper.draw(w, g, size), 1)
    counts = np.bincount(idx.astype(int), minlength=support.size)
    summary["born_marginal"] = chisquare_counts(counts, w)
    summary["parseval_gap"] = jumper.parseval_gap(run.final)
    summary["n_jumps"] = record.n_jumps
    if record.n_jumps >= 1 and basis == "position":
        summary["superluminal"] = jumper.superluminal_stats(record, tuple(opts.get("thresholds", (1, 10, 100))))
    if basis == "position":
        summary["fit"] = _fit(finals, run.final)
        frozen = jumper.final_configurations(run, proc, n_runs, observed=False)
        summary["fit_frozen"] = _fit(frozen, run.final)
    files.append(write_json(out / "jump.json", {"seed": seed, "basis": basis, "rate": proc.rate,
                                                "n_runs": n_runs, "experiment_hash": cfgmod.setup_hash(config)}))
    return files, summary


def _complex_pairs(pairs):
    return [complex(re, im) for re, im in pairs]


def run_bell(config: dict, out: Path):
    opts = config["bell"]
    seed = int(config["seed"])
    angles = opts.get("angles", [0.0, np.pi / 4, np.pi / 8, 3 * np.pi / 8])
    settings = bell.BellSettings(*angles, n_trials=int(opts["n_trials"]), seed=seed)
    state = bell.pair_state(_complex_pairs(opts["state"])) if "state" in opts else bell.bell_state()
    report = bell.chsh(settings, state)
    lhv = bell.lhv_chsh(settings)
    hidden = bell.hiddenness_check(settings, state, float(opts.get("rate", 10.0)), float(opts.get("duration", 1.0)))
    header = ("setting", "angle_a", "angle_b", "pp", "pm", "mp", "mm", "E", "stderr")
    files = [write_csv(out / "bell_counts.csv", header, [[r[h] for h in header] for r in report["settings"]])]
    try:
        rec = bell.pair_jump_process(state, float(opts.get("rate", 10.0)), float(opts.get("duration", 1.0)), seed)
        files.append(write_csv(out / "jump_record.csv", ("t", "value", "basis"),
                               [(t, n, rec.basis) for t, n in zip(rec.times, rec.value_names())]))
    except Exception:  # states with HV/VH support have no two-branch record
        pass
    summary = {
        "S": report["S"], "stderr": report["stderr"], "ci95": report["ci95"],
        "E": [r["E"] for r in report["settings"]],
        "S_exact": bell.exact_chsh(settings, state),
        "S_lhv": lhv["S"], "S_lhv_stderr": lhv["stderr"],
        "hiddenness": hidden, "n_trials": settings.n_trials,
    }
    return files, summary


def run_branches(config: dict, out: Path):
    opts = config["branches"]
    p = opts["p"]
    eps = opts.get("eps", 0.05)
    files, per_n = [], []
    for N in opts["N"]:
        table = branches.distribution_table(N, p)
        files.append(write_csv(out / f"branches_N{N}.csv", ("n_t", "W", "counting_fraction", "born_weight"),
                               [(r["n_t"], r["W"], r["counting_fraction"], r["born_weight"]) for r in table]))
        entry = branches.counting_vs_born(N, p, eps)
        entry["hoeffding_bound"] = branches.hoeffding_bound(N, eps)
        entry["born_outside"] = 1 - entry["born_measure"]
        if N >= 10:
            entry["stirling"] = branches.stirling_typicality(N)
        if opts.get("n_runs"):
            walk = branches.empirical_branch_walk(N, p, int(opts["n_runs"]), int(config["seed"]) + N)
            entry["walk"] = {k: walk[k] for k in ("mean_fraction", "stderr_fraction", "chisquare")}
        per_n.append(entry)
    return files, {"p": p, "eps": eps, "by_N": per_n}


def run_decohere(config: dict, out: Path):
    opts = config["decohere"]
    c = complex(*opts["c"])
    rows = hilbert.decoherence_report(c, opts["n_env"])
    header = ("n_env", "overlap_re", "overlap_im", "abs_overlap", "explicit_abs_overlap", "explicit_error")
    files = [write_csv(out / "decoherence.csv", header,
                       [[r.get(h, float("nan")) for h in header] for r in rows])]
    errs = [r["explicit_error"] for r in rows if "explicit_error" in r]
    return files, {"c": [c.real, c.imag], "rows": len(rows),
                   "max_explicit_error": max(errs) if errs else None,
                   "min_abs_overlap": min(r["abs_overlap"] for r in rows)}


def chain_joint(opts: dict, seed: int) -> jumper.JointBranchState:
    a, b = _complex_pairs(opts["amplitudes"])
    n = np.hypot(abs(a), abs(b))
    a, b = a / n, b / n
    grid = build_grid(opts.get("grid", {"x_min": -20.0, "x_max": 20.0, "n_points": 1024}))
    sep = float(opts.get("lobe_separation", 16.0))
    d = int(opts.get("record_dim", 4))
    gen = rng.stream(seed, 5)
    recs = []
    for _ in range(2):
        v = gen.normal(size=d) + 1j * gen.normal(size=d)
        recs.append(v / np.linalg.norm(v))
    psi_a = states.gaussian(grid, -sep / 2, 1.0)
    psi_b = states.gaussian(grid, sep / 2, 1.0)
    return jumper.JointBranchState(psi_a.with_psi(a * psi_a.psi), psi_b.with_psi(b * psi_b.psi),
                                   recs[0], recs[1])


def run_chain(config: dict, out: Path):
    opts = config["chain"]
    seed = int(config["seed"])
    amps = _complex_pairs(opts["amplitudes"])
    chain = hilbert.build_measurement_chain(amps)
    me = hilbert.observer_state(amps)
    two = hilbert.observer_state(amps, ("Me", "You"))
    cat = hilbert.rotate_basis(me, hilbert.cat_rotation("Me"))
    back = hilbert.rotate_basis(cat, hilbert.cat_rotation("Me").inverse(me.labels[1]))
    files = [write_json(out / "chain_state.json", chain.to_dict()),
             write_json(out / "observer_state.json", me.to_dict()),
             write_json(out / "observer_cat_basis.json", cat.to_dict())]
    joint = chain_joint(opts, seed)
    occ = jumper.occupancy_check(joint, int(opts.get("n_samples", 100_000)), seed)
    summary = {
        "chain_measure_of_existence": [hilbert.measure_of_existence(chain, {"electron1": lab})
                                       for lab in hilbert.ELECTRON],
        "factorization": hilbert.factorization_ambiguity_demo(chain),
        "two_observer_factorization": hilbert.factorization_ambiguity_demo(
            two, side=[0, 1], rewrite=hilbert.cat_rotation("You")),
        "cat_round_trip_error": float(np.max(np.abs(back.amplitudes - me.amplitudes))),
        "cat_amplitudes": cat.amplitudes,
        "support_overlap": joint.support_overlap(),
        "occupancy": occ,
    }
    return files, summary


def run_field_kind(config: dict, out: Path):
    _, files, summary = run_solve(config, out)
    return files, summary


HANDLERS = {
    "solve": run_field_kind, "bohm": run_bohm, "jump": run_jump, "bell": run_bell,
    "branches": run_branches, "decohere": run_decohere, "chain": run_chain,
}


def versions() -> dict:
    return {"interp_lab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def execute(config: dict, out: str | Path | None = None) -> Path:
    """Run ``config`` into ``out`` (default: its ``output_dir`` or ``runs/<name>``)."""
    config = cfgmod.validate(config)
    out = Path(out or config.get("output_dir") or Path("runs") / config.get("name", config["kind"]))
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    files, summary = HANDLERS[config["kind"]](config, out)
    wall = time.perf_counter() - start
    summary_path = write_json(out / "summary.json", {"kind": config["kind"], **summary})
    listed = sorted({Path(f) for f in files} | {summary_path})
    manifest = {
        "config": config,
        "config_hash": cfgmod.config_hash(config),
        "setup_hash": cfgmod.setup_hash(config),
        "seed": config["seed"],
        "kind": config["kind"],
        "versions": versions(),
        "wall_time_s": wall,
        "files": {str(p.relative_to(out)): sha256(p) for p in listed},
    }
    write_json(out / "manifest.json", manifest)
    return out


def data_files(run_dir: str | Path) -> list[Path]:
    run_dir = Path(run_dir)
    return sorted(p for p in run_dir.rglob("*") if p.suffix in DATA_SUFFIXES and p.name != "manifest.json")


# -- compare ----------------------------------------------------------------------

def _load_run(run_dir: Path) -> tuple[dict, dict]:
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text())
        summary = json.loads((run_dir / "summary.json").read_text())
    except FileNotFoundError as exc:
        raise IncompatibleRuns(f"{run_dir} is not a completed run ({exc.filename} missing)") from exc
    return manifest, summary


def _final_positions(run_dir: Path) -> np.ndarray | None:
    path = run_dir / "final_positions.csv"
    if not path.exists():
        return None
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)[:, 2]


def _numeric_leaves(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _numeric_leaves(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _numeric_leaves(v, f"{prefix}[{i}]")
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        yield prefix, float(obj)


def compare(dir_a: str | Path, dir_b: str | Path) -> dict:
    """Aligned statistics of two runs over the same physical setup."""
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    (ma, sa), (mb, sb) = _load_run(dir_a), _load_run(dir_b)
    field_kinds = set(cfgmod.FIELD_KINDS)
    if (ma["kind"] in field_kinds) != (mb["kind"] in field_kinds):
        raise IncompatibleRuns("a wavefield run cannot be compared with a discrete run")
    report = {"run_a": str(dir_a), "run_b": str(dir_b), "kind_a": ma["kind"], "kind_b": mb["kind"]}
    if ma["kind"] in field_kinds:
        if ma["setup_hash"] != mb["setup_hash"]:
            ga, gb = ma["config"]["grid"], mb["config"]["grid"]
            what = "grids" if ga != gb else "physical setups"
            raise IncompatibleRuns(f"runs use different {what}")
        field = read_field(dir_a / "snapshots" / "final")
        xa, xb = _final_positions(dir_a), _final_positions(dir_b)
        if xa is not None and xb is not None:
            fa, fb = _fit(xa, field), _fit(xb, field)
            report["fit_a"], report["fit_b"] = fa, fb
            edges = np.linspace(field.grid.x_min, field.grid.x_max, 101)
            ha = np.histogram(xa[np.isfinite(xa)], edges)[0] / max(np.isfinite(xa).sum(), 1)
            hb = np.histogram(xb[np.isfinite(xb)], edges)[0] / max(np.isfinite(xb).sum(), 1)
            report["histogram_max_abs_diff"] = float(np.max(np.abs(ha - hb)))
            report["both_pass"] = bool(min(fa["ks_p_value"], fb["ks_p_value"],
                                           fa["chi2_p_value"], fb["chi2_p_value"]) > 0.01)
    elif ma["kind"] != mb["kind"]:
        raise IncompatibleRuns(f"cannot compare {ma['kind']} with {mb['kind']}")
    la, lb = dict(_numeric_leaves(sa)), dict(_numeric_leaves(sb))
    diffs = {k: lb[k] - la[k] for k in sorted(set(la) & set(lb))}
    report["summary_diffs"] = diffs
    report["max_abs_diff"] = max((abs(v) for v in diffs.values()), default=0.0)
    files_a = {k: v for k, v in ma["files"].items() if k.endswith(DATA_SUFFIXES)}
    files_b = {k: v for k, v in mb["files"].items() if k.endswith(DATA_SUFFIXES)}
    report["differing_files"] = sorted(k for k in set(files_a) | set(files_b)
                                       if files_a.get(k) != files_b.get(k))
    return report
