import numpy as np
import pytest

from oracles import fd_buckling_mu
from plateflow.assembly import StateVector
from plateflow.integrator import IntegratorConfig, step
from plateflow.plate_forces import ForceModel
from plateflow.stationary import (branch_table, buckling_threshold, h2_distance, newton_solve,
                                  solve_stationary, stationary_residual)


@pytest.fixture(scope="module")
def fd_mu():
    return fd_buckling_mu(1.0, 1200)


def test_buckling_threshold_matches_fd_oracle(plate, fd_mu):
    assert abs(buckling_threshold(plate) / fd_mu - 1) < 1e-3


def test_linear_model_has_only_zero(plate):
    s = solve_stationary(ForceModel("linear"), plate)
    assert len(s) == 1 and not np.any(s.points[0].beta)


def test_below_threshold_only_zero(plate):
    mu1 = buckling_threshold(plate)
    s = solve_stationary(ForceModel("berger", berger_gamma=0.9 * mu1), plate, n_random=12)
    assert len(s) == 1
    assert np.linalg.norm(s.points[0].beta) < 1e-9


def test_first_branch_amplitude(plate, fd_mu):
    mu1 = buckling_threshold(plate)
    kappa = 1.7
    s = solve_stationary(ForceModel("berger", berger_kappa=kappa, berger_gamma=1.5 * mu1), plate)
    amps = sorted({round(p.amplitude, 6) for p in s.points})
    assert amps[0] == 0.0
    # lowest nontrivial branch: kappa ||u'||^2 = Gamma - mu_1
    nontrivial = min(p.amplitude for p in s.points if p.amplitude > 0)
    assert abs(kappa * nontrivial / (1.5 * mu1 - fd_mu) - 1) < 0.01


def test_solutions_come_in_sign_pairs(plate):
    mu1 = buckling_threshold(plate)
    s = solve_stationary(ForceModel("berger", berger_gamma=1.5 * mu1), plate)
    betas = s.betas()
    for b in betas:
        assert min(h2_distance(plate, -b, c) for c in betas) <= 1e-6


def test_solutions_are_fixed_points_of_a_step(system):
    mu1 = buckling_threshold(system.plate)
    model = ForceModel("berger", berger_gamma=1.5 * mu1)
    force = model.bind(system.plate)
    for p in solve_stationary(model, system.plate).points:
        s = StateVector(np.zeros(system.nf), p.beta, np.zeros(system.n))
        new, _ = step(system, s, force, IntegratorConfig(dt=1e-2, scheme="midpoint_discrete_gradient"))
        assert np.abs(new.beta - p.beta).max() <= 1e-9
        assert np.abs(new.y).max() <= 1e-9


def test_solutions_have_zero_mean(plate):
    mu1 = buckling_threshold(plate)
    for p in solve_stationary(ForceModel("berger", berger_gamma=3 * mu1), plate).points:
        assert abs(plate.mean(plate.combine(p.beta))) <= 1e-12
        assert p.residual <= 1e-11 * plate.eigenvalues.max()


def test_kirchhoff_stationary_states(plate):
    model = ForceModel("kirchhoff", kirchhoff_cubic=1.0, kirchhoff_lambda=2 * plate.eigenvalues[0])
    s = solve_stationary(model, plate, n_random=16)
    assert len(s) >= 3
    for p in s.points:
        assert np.linalg.norm(stationary_residual(p.beta, 0.0, model, plate)) <= 1e-8 * plate.eigenvalues.max()


def test_newton_reports_failure(plate):
    model = ForceModel("berger", berger_gamma=200.0)
    _, rn, ok = newton_solve(model, plate, np.ones(plate.n), max_iter=1)
    assert not ok and rn > 0


def test_continuation_path_reaches_same_branch(plate):
    mu1 = buckling_threshold(plate)
    model = ForceModel("berger", berger_gamma=2 * mu1)
    direct = solve_stationary(model, plate)
    path = solve_stationary(model, plate, gamma_path=np.linspace(1.1 * mu1, 1.9 * mu1, 5))
    assert path.gamma_path
    assert {round(p.amplitude, 6) for p in path.points} <= {round(p.amplitude, 6) for p in direct.points}


def test_branch_table_rows(plate):
    mu1 = buckling_threshold(plate)
    rows = branch_table(ForceModel("berger"), plate, [0.5 * mu1, 1.5 * mu1])
    low = [r for r in rows if r[0] == 0.5 * mu1]
    high = [r for r in rows if r[0] == 1.5 * mu1]
    assert len(low) == 1 and len(high) >= 3
    assert all(r[2] <= 1e-8 for r in rows)
