import numpy as np
import pytest

from interp_lab import states, tdse
from interp_lab.errors import LobesNotSeparated, UnstableConfig
from interp_lab.field import Grid, WaveField, expectation_x, trapezoid
from interp_lab.potentials import PotentialSpec, double_slit_wavenumber

HARMONIC = PotentialSpec("harmonic", {"omega": 1.0})
FREE = PotentialSpec("free")


@pytest.mark.parametrize("method", ["split_step", "crank_nicolson"])
def test_stationary_phase(method):
    g = Grid(-10, 10, 1024)
    f, e = states.stationary_state(g, HARMONIC, 0, method)
    cfg = tdse.SolverConfig(method, 0.01, 1)
    out = tdse.step(f, HARMONIC, cfg)
    assert e == pytest.approx(0.5, abs=2e-5)
    # Strang splitting is exact only up to its O(dt^3) commutator term
    tol = 1e-12 if method == "crank_nicolson" else 1e-8
    assert np.max(np.abs(np.abs(out.psi) - np.abs(f.psi))) < tol
    i = int(np.argmax(np.abs(f.psi)))
    ratio = out.psi[i] / f.psi[i]
    if method == "crank_nicolson":
        # the Cayley map advances an eigenvector by exactly (1 - iE dt/2)/(1 + iE dt/2)
        assert ratio == pytest.approx((1 - 0.005j * e) / (1 + 0.005j * e), abs=1e-12)
    # both agree with exp(-i E0 dt), E0 = 1/2, up to O(dt^3) and the O(dx^2) energy shift
    assert ratio == pytest.approx(np.exp(-0.5j * 0.01), abs=1e-6)


def test_analytic_ground_state_phase_split_step():
    g = Grid(-10, 10, 1024)
    f = states.harmonic_ground_state(g)
    out = tdse.step(f, HARMONIC, tdse.SolverConfig("split_step", 0.01, 1))
    i = 512
    assert out.psi[i] / f.psi[i] == pytest.approx(np.exp(-0.005j), abs=1e-7)


def test_free_spreading_law():
    g = Grid(-40, 40, 4096)
    f = states.gaussian(g, 0, 1.0)
    snaps = tdse.evolve(f, FREE, tdse.SolverConfig("split_step", 1e-3, 2000, 2000))
    _, var = expectation_x(snaps[-1])
    # |psi|^2 has standard deviation sigma(t)/sqrt 2 for psi ~ exp(-x^2/(2 sigma^2))
    width = np.sqrt(2 * var)
    assert snaps[-1].t == pytest.approx(2.0)
    assert abs(width - np.sqrt(1 + 2.0**2)) < 1e-3
    exact = states.free_gaussian(g, 2.0)
    assert np.max(np.abs(snaps[-1].psi - exact.psi)) < 1e-8


def test_plane_wave_exact_under_split_step():
    g = Grid(0, 2 * np.pi * 256 / 255, 256)
    n = g.n_points
    k = 2 * np.pi * 5 / (n * g.dx)
    f = WaveField(g, np.exp(1j * k * g.x))
    cfg = tdse.SolverConfig("split_step", 0.01, 50, 50)
    out = tdse.evolve(f, FREE, cfg)[-1]
    expect = np.exp(1j * k * g.x - 0.5j * k**2 * 0.5)
    assert np.max(np.abs(out.psi - expect)) < 1e-12


def test_zero_steps_returns_initial():
    g = Grid(-5, 5, 64)
    f = states.gaussian(g)
    res = tdse.run_experiment(f, FREE, tdse.SolverConfig("split_step", 1e-3, 0))
    assert len(res) == 1 and res[0] is f


@pytest.mark.parametrize("method", ["split_step", "crank_nicolson"])
def test_per_step_norm_and_linearity(method):
    g = Grid(-10, 10, 256)
    a = states.gaussian(g, -1, 1.0, 2.0)
    b = states.gaussian(g, 2, 0.7, -1.0)
    cfg = tdse.SolverConfig(method, 1e-3, 1)
    sa = tdse.step(a, HARMONIC, cfg)
    assert abs(sa.norm() - a.norm()) <= 1e-12
    alpha, beta = 0.3 - 0.2j, 1.1 + 0.5j
    mix = a.with_psi(alpha * a.psi + beta * b.psi)
    lhs = tdse.step(mix, HARMONIC, cfg).psi
    rhs = alpha * sa.psi + beta * tdse.step(b, HARMONIC, cfg).psi
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@pytest.mark.parametrize("method", ["split_step", "crank_nicolson"])
def test_energy_conservation(method):
    g = Grid(-12, 12, 1024)
    f = states.harmonic_ground_state(g, 1.0, 0.0, 2.0)
    cfg = tdse.SolverConfig(method, 1e-3, 2000, 2000)
    snaps = tdse.evolve(f, HARMONIC, cfg)
    e0 = tdse.energy(snaps[0], HARMONIC, method)
    e1 = tdse.energy(snaps[-1], HARMONIC, method)
    assert abs(e1 - e0) / abs(e0) <= 1e-6


def test_method_agreement_harmonic():
    g = Grid(-12, 12, 1024)
    f = states.harmonic_ground_state(g, 1.0, 0.0, 1.0)
    dens = []
    for m in ("split_step", "crank_nicolson"):
        out = tdse.evolve(f, HARMONIC, tdse.SolverConfig(m, 1e-3, 1000, 1000))[-1]
        dens.append(np.abs(out.psi) ** 2)
    assert np.sqrt(trapezoid((dens[0] - dens[1]) ** 2, g.dx)) < 1e-4


def test_coherent_state_follows_classical_orbit():
    g = Grid(-12, 12, 1024)
    f = states.harmonic_ground_state(g, 1.0, 0.0, 2.0)
    out = tdse.evolve(f, HARMONIC, tdse.SolverConfig("split_step", 1e-3, 1000, 1000))[-1]
    mean, var = expectation_x(out)
    assert mean == pytest.approx(2 * np.cos(1.0), abs=1e-6)
    assert var == pytest.approx(0.5, abs=1e-6)


def test_split_step_requires_power_of_two():
    with pytest.raises(ValueError):
        tdse.step(states.gaussian(Grid(-5, 5, 100)), FREE, tdse.SolverConfig("split_step", 1e-3, 1))


def test_stability_guard():
    g = Grid(-5, 5, 64)
    f = states.gaussian(g)
    tall = PotentialSpec("gaussian_barrier", {"height": 5000.0, "width": 1.0})
    with pytest.warns(RuntimeWarning):
        tdse.step(f, tall, tdse.SolverConfig("crank_nicolson", 1e-3, 1))
    with pytest.raises(UnstableConfig):
        tdse.step(f, tall, tdse.SolverConfig("crank_nicolson", 1e-3, 1, strict=True))


def test_potential_validation():
    with pytest.raises(ValueError):
        PotentialSpec("harmonic", {"omega": -1.0})
    with pytest.raises(ValueError):
        PotentialSpec("gaussian_barrier", {"height": float("inf")})
    with pytest.raises(ValueError):
        PotentialSpec("moat")
    v = PotentialSpec("double_slit", {"edge": 0.2}).evaluate(Grid(-10, 10, 256))
    assert np.all(np.isreal(v)) and v.max() <= 50.0
    assert double_slit_wavenumber(3.0) == pytest.approx(2 * np.pi)


def _count_maxima(rho, x, half_width):
    sel = np.abs(x) < half_width
    r = rho[sel]
    peak = r.max()
    interior = (r[1:-1] > r[:-2]) & (r[1:-1] >= r[2:]) & (r[1:-1] > 0.05 * peak)
    return int(interior.sum())


@pytest.fixture(scope="module")
def double_slit_run():
    g = Grid(-80, 80, 4096)
    f = states.gaussian(g, 0, 6.0)
    v = PotentialSpec("double_slit", {"slit_width": 1.0, "separation": 4.0, "edge": 0.2})
    return tdse.run_experiment(f, v, tdse.SolverConfig("split_step", 1e-3, 4000, 500))


def test_double_slit_fringes(double_slit_run):
    final = double_slit_run.final
    rho = np.abs(final.psi) ** 2
    # far-field fringe spacing 2 pi t / d, so |x| < 12 holds several fringes at t = 4
    assert _count_maxima(rho, final.x, 12.0) >= 3
    assert double_slit_run.norm_drift < 1e-8
    assert 0 < double_slit_run.info["screen_transmission"] < 1


@pytest.fixture(scope="module")
def beam_splitter_run():
    g = Grid(-100, 100, 4096)
    f = states.gaussian(g, -25, 5.0, 3.0)
    v = PotentialSpec("beam_splitter", {"width": 0.25})
    return tdse.run_experiment(f, v, tdse.SolverConfig("split_step", 0.005, 3200, 20))


def test_beam_splitter_balanced(beam_splitter_run):
    final = beam_splitter_run.final
    t = tdse.transmission(final, 0.0)
    assert abs(t - 0.5) < 0.005
    assert abs((1 - t) - 0.5) < 0.02
    assert beam_splitter_run.info["tuned_height"] > 0


def test_branch_split_linearity_and_recombination(beam_splitter_run):
    rep = tdse.branch_split_check(beam_splitter_run, further_time=5.0, recombine_omega=0.1)
    assert rep["lobe_overlap"] < 1e-3
    assert rep["independent_error"] < 1e-10
    assert rep["visibility_recombined"] > 0.9
    assert rep["visibility_independent"] < rep["visibility_recombined"]
    assert rep["reflected"] + rep["transmitted"] == pytest.approx(1, abs=1e-12)


def test_branch_split_overlapping_lobes(beam_splitter_run):
    early = tdse.RunResult(beam_splitter_run.snapshots[:81], beam_splitter_run.potential,
                           beam_splitter_run.config, 0.0, 0.0)
    with pytest.raises(LobesNotSeparated):
        tdse.branch_split_check(early)
