"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints a single ``criterion NN PASS|FAIL`` line (with capture
disabled so it shows in the normal pytest log) and then asserts the verdict.
Run alone with ``python3 -m pytest tests/test_acceptance.py -v``.
"""

import time

import numpy as np
import pytest

from oracles import beam_root, fd_buckling_mu, fd_constrained_kappa
from plateflow.assembly import (StateVector, add_random, build_bases, build_initial_state, build_system,
                                state_from_config, trace_mismatch)
from plateflow.base_flow import stability_margin
from plateflow.cli import main
from plateflow.config import DomainSpec, InitialSpec, RunConfig
from plateflow.diagnostics import distance_to_stationary, fit_decay, quasi_stability_check
from plateflow.extension import build_extension, default_cutoff_depth
from plateflow.fluid_basis import make_grid
from plateflow.hermite import clamped_beam_modes, clamped_raw_basis
from plateflow.integrator import IntegratorConfig, energy0, simulate
from plateflow.plate_forces import ForceModel, bound_certificates, gradient_check
from plateflow.plate_modes import zero_mean_eigenmodes
from plateflow.stationary import buckling_threshold, solve_stationary
from test_base_flow import CASES

DG = "midpoint_discrete_gradient"


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, detail
    return emit


# shared runs ---------------------------------------------------------------------

class Run:
    """A trajectory together with the system it lives on and its wall time."""

    def __init__(self, system, traj, seconds, force=None):
        self.system, self.traj, self.seconds, self.force = system, traj, seconds, force


RUNS = {}


def _timed(name, system, state, force=None, **kw):
    if name not in RUNS:
        t0 = time.perf_counter()
        traj = simulate(system, state, force, **kw)
        RUNS[name] = Run(system, traj, time.perf_counter() - t0, force)
    return RUNS[name]


@pytest.fixture(scope="module")
def linear_run():
    cfg = RunConfig()
    system = build_system(cfg)
    return _timed("linear", system, state_from_config(system, cfg, 0),
                  integ=IntegratorConfig(dt=1e-2), n_steps=2000)


@pytest.fixture(scope="module")
def berger_setup():
    cfg = RunConfig()
    system = build_system(cfg)
    mu1 = buckling_threshold(system.plate)
    model = ForceModel("berger", berger_kappa=1.0, berger_gamma=1.5 * mu1)
    return cfg, system, model, mu1


@pytest.fixture(scope="module")
def berger_run(berger_setup):
    cfg, system, model, _ = berger_setup
    integ = IntegratorConfig(dt=1e-2, scheme=DG)
    return _timed("berger", system, state_from_config(system, cfg, 0), model.bind(system.plate),
                  integ=integ, t_final=200.0, sample_every=100)


def _decay_run(name, **physics):
    cfg = RunConfig(t_final=50.0, **physics)
    system = build_system(cfg)
    return _timed(name, system, state_from_config(system, cfg, 0),
                  integ=IntegratorConfig(dt=1e-2), t_final=50.0, sample_every=10)


@pytest.fixture(scope="module")
def decay_runs():
    return {"drag": _decay_run("decay_drag", k=0.0, drag_sigma=0.1),
            "poincare": _decay_run("decay_poincare", k=0.0, drag_sigma=0.0, oseen_u=1.0)}


# 1 ---------------------------------------------------------------------------------

def test_criterion_01_energy_balance(report, linear_run, berger_run):
    lin = linear_run.traj
    lin_res = float(np.abs(lin.residual).max())
    lin_tol = 1e-10 * (1 + lin.E0[0])
    ber_res = float(np.abs(berger_run.traj.residual).max())
    ber_tol = 10 * IntegratorConfig().newton_tol
    ok = (len(lin.residual) == 2000 and lin_res <= lin_tol and berger_run.traj.completed
          and ber_res <= ber_tol and linear_run.seconds <= 60 and berger_run.seconds <= 60)
    report(1, "discrete energy balance", ok,
           f"linear max residual {lin_res:.2e} <= {lin_tol:.2e} ({linear_run.seconds:.1f} s); "
           f"Berger discrete-gradient {ber_res:.2e} <= {ber_tol:.1e} ({berger_run.seconds:.1f} s)")


# 2 ---------------------------------------------------------------------------------

def test_criterion_02_exponential_decay(report, decay_runs):
    parts, ok = [], True
    for label, run in decay_runs.items():
        t = run.traj.times
        fit = fit_decay(t, run.traj.E0, window=(0.5 * t[-1], t[-1]))
        good = run.traj.completed and fit.gamma > 0 and fit.r2 >= 0.99 and run.seconds <= 120
        ok &= good
        parts.append(f"{label}: gamma {fit.gamma:.4f}, R2 {fit.r2:.6f} ({run.seconds:.1f} s)")
    report(2, "exponential stability", ok, "; ".join(parts))


# 3 ---------------------------------------------------------------------------------

def test_criterion_03_stability_margin(report):
    worst, ok = 0.0, True
    branches = {}
    for flow, c_O, sigma, margin, branch in CASES:
        rep = stability_margin(flow, c_O)
        err = abs(rep.margin - margin)
        worst = max(worst, err)
        ok &= err <= 1e-12 and rep.satisfied == (branch != "none") and rep.which_branch == branch
        branches[branch] = branches.get(branch, 0) + 1
    ok &= all(v >= 3 for v in branches.values()) and len(branches) == 3
    report(3, "stability-margin formula", ok,
           f"{len(CASES)} hand cases {branches}, max margin error {worst:.1e}")


# 4 ---------------------------------------------------------------------------------

def _all_runs():
    return [r for r in RUNS.values()]


def test_criterion_04_mean_conservation(report, linear_run, berger_run, decay_runs, richardson,
                                        quasi_pair):
    worst_ut = worst_u = 0.0
    for run in _all_runs():
        s = run.system
        m0 = s.mean_u(run.traj.state(0))
        for i in range(len(run.traj)):
            st = run.traj.state(i)
            worst_ut = max(worst_ut, abs(s.mean_ut(st)))
            worst_u = max(worst_u, abs(s.mean_u(st) - m0))
    ok = worst_ut <= 1e-12 and worst_u <= 1e-12
    report(4, "volume and mean conservation", ok,
           f"{len(RUNS)} trajectories, max |int u_t| {worst_ut:.1e}, max drift of int u {worst_u:.1e}")


# 5 ---------------------------------------------------------------------------------

def test_criterion_05_incompressibility_and_trace(report, linear_run, berger_run, decay_runs,
                                                  richardson, quasi_pair):
    rng = np.random.default_rng(5)
    worst_div = worst_trace = 0.0
    for run in _all_runs():
        s = run.system
        dom_lo, dom_hi = s.stream.px.space.a, s.stream.px.space.b
        h = s.flow.h
        x1 = rng.uniform(dom_lo, dom_hi, 10_000)
        x3 = rng.uniform(-h, 0.0, 10_000)
        for i in (0, len(run.traj) - 1):
            worst_div = max(worst_div, float(np.abs(s.velocity(run.traj.state(i)).divergence(x1, x3)).max()))
        for i in range(len(run.traj)):
            worst_trace = max(worst_trace, trace_mismatch(s, run.traj.state(i), 50))
    ok = worst_div <= 1e-12 and worst_trace <= 1e-10
    report(5, "incompressibility and trace", ok,
           f"max |div v| {worst_div:.1e} at 1e4 points, max trace mismatch {worst_trace:.1e} "
           f"over every sample of {len(RUNS)} trajectories")


# 6 ---------------------------------------------------------------------------------

def test_criterion_06_extension_contract(report):
    dom = DomainSpec()
    plate = zero_mean_eigenmodes(8, dom.plate_lo, dom.plate_hi, n_raw=64)
    hc = default_cutoff_depth(dom)
    ext = build_extension(plate, make_grid(dom, 32, 64, hc), hc)
    fine = build_extension(plate, make_grid(dom, 64, 128, hc), hc)
    rng = np.random.default_rng(6)
    x = np.linspace(plate.a, plate.b, 200)
    trace = lin = 0.0
    for _ in range(20):
        u, w = plate.coeffs @ rng.standard_normal(8), plate.coeffs @ rng.standard_normal(8)
        v = ext.extend(u)(x, np.zeros_like(x))
        trace = max(trace, float(np.abs(v[0]).max()), float(np.abs(v[1] - plate.eval_raw(u, x)).max()))
        a, b = rng.uniform(-3, 3, 2)
        p1, p3 = rng.uniform(dom.box_lo, dom.box_hi, 100), rng.uniform(-dom.h, 0, 100)
        lhs = ext.extend(a * u + b * w)(p1, p3)
        rhs = a * ext.extend(u)(p1, p3) + b * ext.extend(w)(p1, p3)
        lin = max(lin, float(np.abs(lhs - rhs).max() / (1 + np.abs(lhs).max())))
    c1, c2 = ext.bound_constant(), fine.bound_constant()
    drift = abs(c2 / c1 - 1)
    ok = trace <= 1e-12 and lin <= 1e-13 and drift < 0.05
    report(6, "extension contract", ok,
           f"trace error {trace:.1e}, linearity error {lin:.1e}, bound constant {c1:.6f} -> {c2:.6f} "
           f"(change {drift:.1e})")


# 7 ---------------------------------------------------------------------------------

def test_criterion_07_plate_eigenmodes(report):
    root = beam_root()
    raw = clamped_beam_modes(clamped_raw_basis(0.0, 1.0, 64), 1)[0][0]
    raw_err = abs(raw / root**4 - 1)
    plate = zero_mean_eigenmodes(8, 0.0, 1.0, n_raw=64)
    fd = fd_constrained_kappa(1.0, 2000)[0]
    con_err = abs(plate.eigenvalues[0] / fd - 1)
    ok = raw_err < 1e-3 and con_err < 1e-3
    report(7, "plate eigenmodes", ok,
           f"raw kappa {raw:.6f} vs ({root:.6f})^4 = {root**4:.6f} (rel {raw_err:.1e}); "
           f"constrained kappa_1 {plate.eigenvalues[0]:.4f} vs FD {fd:.4f} (rel {con_err:.1e})")


# 8 ---------------------------------------------------------------------------------

def test_criterion_08_force_consistency(report):
    plate = zero_mean_eigenmodes(8, 0.0, 1.0, n_raw=64)
    rng = np.random.default_rng(8)
    models = [ForceModel("kirchhoff", kirchhoff_cubic=1.0, kirchhoff_lambda=50.0),
              ForceModel("berger", berger_kappa=1.0, berger_gamma=120.0)]
    scale = 1 / np.sqrt(plate.eigenvalues)
    worst_grad, margins = 0.0, []
    for m in models:
        for _ in range(20):
            beta = rng.standard_normal(8) * scale * 10 ** rng.uniform(0, 2)
            c0 = rng.uniform(-1, 1)
            worst_grad = max(worst_grad, gradient_check(m, beta, rng.standard_normal(8), plate, c0))
        samples = [(rng.standard_normal(8) * scale * 10 ** rng.uniform(-1, 2.5), rng.uniform(-1, 1))
                   for _ in range(100)]
        cert = bound_certificates(m, samples, plate)
        margins += [cert.potential_margin, cert.pairing_margin]
    ok = worst_grad <= 1e-6 and min(margins) >= 0
    report(8, "force consistency", ok,
           f"worst gradient-check error {worst_grad:.1e} over 40 states; "
           f"smallest certificate margin {min(margins):.3e} over 200 samples")


# 9 ---------------------------------------------------------------------------------

def test_criterion_09_convergence_to_stationary_set(report, berger_setup, berger_run):
    _, system, model, mu1 = berger_setup
    stat = solve_stationary(model, system.plate)
    traj = berger_run.traj
    dist = distance_to_stationary(traj.state(len(traj) - 1), stat.betas(), system)
    mu_fd = fd_buckling_mu(1.0, 2000)
    expected = (model.berger_gamma - mu_fd) / model.berger_kappa
    amp = min(p.amplitude for p in stat.points if p.amplitude > 0)
    amp_err = abs(amp / expected - 1)
    ok = (traj.completed and abs(traj.times[-1] - 200.0) < 1e-9 and dist <= 1e-4 and amp_err < 0.01
          and berger_run.seconds <= 300)
    report(9, "gradient-system convergence", ok,
           f"distance at t=200 {dist:.2e}; amplitude {amp:.4f} vs (Gamma - mu1_FD)/kappa "
           f"{expected:.4f} (rel {amp_err:.1e}); {len(stat)} stationary states")


# 10 --------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def quasi_pair(berger_setup):
    cfg, system, model, _ = berger_setup
    force = model.bind(system.plate)
    s1 = state_from_config(system, cfg, 0)
    zero = StateVector(np.zeros(system.nf), np.zeros(system.n), np.zeros(system.n))
    dz = add_random(system, zero, 1e-3, 10)
    s2 = StateVector(s1.alpha + dz.alpha, s1.beta + dz.beta, s1.beta_dot + dz.beta_dot, s1.c0)
    integ = IntegratorConfig(dt=1e-2, scheme=DG)
    r1 = _timed("quasi_1", system, s1, force, integ=integ, t_final=20.0, sample_every=10)
    r2 = _timed("quasi_2", system, s2, force, integ=integ, t_final=20.0, sample_every=10)
    return r1, r2


def test_criterion_10_quasi_stability(report, quasi_pair):
    r1, r2 = quasi_pair
    rep = quasi_stability_check(r1.traj, r2.traj, r1.system)
    g, m = rep.best
    z0 = float(np.sqrt(rep.z[0]))
    ok = abs(z0 - 1e-3) <= 1e-12 and rep.feasible and g > 0 and np.isfinite(m) and rep.certifies(g, m)
    report(10, "quasi-stability certificate", ok,
           f"||Z0|| = {z0:.3e}; certificate gamma* = {g:.3g}, M_R = {m:.4g}, "
           f"{len(rep.pareto_rows())} feasible rates")


# 11 --------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def richardson():
    dom = DomainSpec(h=1.0, plate_lo=0.0, plate_hi=4.0, box_lo=-4.0, box_hi=8.0)
    cfg = RunConfig(domain=dom, nu=1.0, drag_sigma=0.1,
                    initial=InitialSpec(u0_amplitude=0.1, random_amplitude=0.0))
    system = build_system(cfg)
    s0 = state_from_config(system, cfg, 0)
    return {dt: _timed(f"richardson_{dt}", system, s0, integ=IntegratorConfig(dt=dt), t_final=2.0)
            for dt in (4e-2, 2e-2, 1e-2, 5e-3)}


def _terminal_gap(a, b):
    sa, sb = a.traj.state(len(a.traj) - 1), b.traj.state(len(b.traj) - 1)
    d = StateVector(sa.alpha - sb.alpha, sa.beta - sb.beta, sa.beta_dot - sb.beta_dot, sa.c0 - sb.c0)
    return float(np.sqrt(2 * energy0(a.system, d)))


def test_criterion_11_integrator_order(report, richardson):
    dts = sorted(richardson, reverse=True)
    gaps = [_terminal_gap(richardson[dts[i]], richardson[dts[i + 1]]) for i in range(3)]
    slopes = [float(np.log2(gaps[i] / gaps[i + 1])) for i in range(2)]
    ok = all(abs(s - 2.0) <= 0.2 for s in slopes)
    report(11, "integrator order", ok,
           "Richardson slopes " + ", ".join(f"{s:.4f}" for s in slopes)
           + " from terminal gaps " + ", ".join(f"{g:.3e}" for g in gaps))


# 12 --------------------------------------------------------------------------------

def test_criterion_12_determinism(report, tmp_path):
    cfg = tmp_path / "sweep.ini"
    cfg.write_text("[discretization]\nn_plate = 4\nm1 = 4\nm3 = 4\nt_final = 2\n"
                   "[initial]\nrandom_amplitude = 1\n")
    blobs = []
    for name in ("first", "second"):
        out = tmp_path / name
        code = main(["sweep", "--config", str(cfg), "--out", str(out), "--k", "0,0.5",
                     "--sigma", "0,0.1", "--threads", "4", "--seed", "3"])
        files = sorted(out.rglob("*.csv"))
        blobs.append((code, [(f.relative_to(out).as_posix(), f.read_bytes()) for f in files]))
    ok = blobs[0][0] == blobs[1][0] == 0 and blobs[0][1] == blobs[1][1] and len(blobs[0][1]) == 5
    report(12, "determinism", ok, f"{len(blobs[0][1])} CSV files compared byte for byte")
