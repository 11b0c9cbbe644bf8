"""Horizon sweeps, convergence detection, and coefficient recovery."""

import numpy as np
import pytest

from horizon_pmp import catalog, verify
from horizon_pmp.certificate import TheoremVariant
from horizon_pmp.model import ProblemSpec, SystemKind, Trajectory, interior_controls
from horizon_pmp.qualification import FunctionalFamily
from horizon_pmp.sweep import recover_coefficients, sweep
from horizon_pmp.differentials import stage_derivatives
from horizon_pmp.truncation import reduce_to_finite_horizon, solve_multipliers


def _zero_criterion_problem(stages=12):
    prob = ProblemSpec(
        n=1, d=1, sigma=np.zeros(1), kind=SystemKind.EQUATION,
        controls=interior_controls(),
        dynamics=lambda t, x, u: x,
        criterion=lambda t, x, u: 0.0,
        H_max=stages + 2, name="zero")
    traj = Trajectory(states=np.zeros((stages + 1, 1)), controls=np.zeros((stages, 1)))
    return prob, traj


def test_zero_criterion_sweep_converges_to_normal_trivial_certificate():
    prob, traj = _zero_criterion_problem()
    result = sweep(prob, traj, (3, 5, 7))
    assert result.converged
    assert result.limits.lambda0 == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(result.limits.p)) <= 1e-10
    assert result.window == 2


def test_slack1_sweep_slackness_collapse():
    prob = catalog.catalog_problem("SLACK1")
    traj = catalog.catalog_candidate("SLACK1", 14)
    result = sweep(prob, traj, (4, 8, 12))
    assert result.converged
    assert result.limits.lambda0 == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(result.limits.p)) <= 1e-10


def test_lq1_sweep_converges_and_limits_verify():
    prob = catalog.catalog_problem("LQ1")
    traj = catalog.catalog_candidate("LQ1")
    result = sweep(prob, traj, (10, 20, 40, 80))
    assert result.converged
    # the tail pairs of the costate profile are Cauchy well below tolerance
    assert np.all(result.cauchy_profile["p"][-3:] <= 1e-6)
    report = verify(prob, traj, result.limits, tol=1e-6)
    assert report.passed, report.summary()
    assert result.limits.lambda0 >= 0.1  # LQ1 is a normal problem


def test_sweep_records_failing_horizons():
    prob = catalog.catalog_problem("LQ1")
    traj = catalog.catalog_candidate("LQ1", 25)
    controls = traj.controls.copy()
    controls[2] += 0.05
    states = [traj.states[0]]
    for t in range(len(controls)):
        states.append(prob.dynamics(t, states[-1], controls[t]))
    bad = Trajectory(states=np.array(states), controls=controls)
    result = sweep(prob, bad, (5, 10, 20))
    assert not result.converged
    assert result.failed_h == (5, 10, 20)
    assert result.limits is None


def test_sweep_input_validation():
    prob, traj = _zero_criterion_problem()
    with pytest.raises(ValueError):
        sweep(prob, traj, (5,))
    with pytest.raises(ValueError):
        sweep(prob, traj, (5, 5))
    with pytest.raises(ValueError):
        sweep(prob, traj, (5, 10 ** 6))


def test_sweep_extension_respects_adjoint_recursion():
    prob = catalog.catalog_problem("LQ1")
    traj = catalog.catalog_candidate("LQ1")
    result = sweep(prob, traj, (10, 20, 40, 80), extend_to=20)
    assert result.limits.window == 20
    report = verify(prob, traj, result.limits, tol=1e-6)
    assert report.passed, report.summary()


def test_recover_coefficients_exact_decomposition():
    basis = FunctionalFamily(rows=np.array([[1.0, 0.0], [0.0, 1.0]]))
    combos = [np.array([2.0, 3.0])] * 4
    rec = recover_coefficients(basis, combos)
    assert np.max(np.abs(rec.coefficients - [2.0, 3.0])) <= 1e-10
    assert np.all(rec.cauchy_flags)


def test_recover_coefficients_convergent_sequence():
    basis = FunctionalFamily(rows=np.array([[1.0, 0.0]]))
    combos = [np.array([1.0 + 1.0 / h, 0.0]) for h in (100, 1000, 10_000, 100_000)]
    rec = recover_coefficients(basis, combos, cauchy_tol=1e-2)
    assert np.allclose(rec.coefficients[:, 0], [1.01, 1.001, 1.0001, 1.00001])
    assert rec.cauchy_flags[0]


def test_recover_coefficients_rejects_dependent_basis():
    basis = FunctionalFamily(rows=np.array([[1.0, 0.0], [2.0, 0.0]]))
    with pytest.raises(ValueError, match="dependent"):
        recover_coefficients(basis, [np.zeros(2)])


def test_recovered_mu_round_trips_through_stationarity():
    """Reconstruct CON1's mu from the WM residual left by (lambda0, p)."""
    prob = catalog.catalog_problem("CON1")
    traj = catalog.catalog_candidate("CON1", 25)
    h_list = (6, 9, 12)
    basis = FunctionalFamily(rows=np.array([[1.0]]))  # Dg row at the boundary
    per_h = []
    for h in h_list:
        fh = reduce_to_finite_horizon(prob, traj, h)
        derivs = [stage_derivatives(prob, traj, t) for t in range(h + 1)]
        tm = solve_multipliers(fh, traj, derivs)
        assert tm.accepted
        # WM: p_{t+1} D2f + lambda0 D2phi + mu_t Dg = 0, so the combination
        # mu_t Dg equals the negated multiplier-free part.
        t = 2
        combo = -(tm.p[t] @ derivs[t].D2f + tm.lambda0 * derivs[t].D2phi)
        per_h.append((combo, tm.mu[t, 0]))
    rec = recover_coefficients(basis, [c for c, _ in per_h], cauchy_tol=1e-3)
    for i, (_, mu_direct) in enumerate(per_h):
        assert rec.coefficients[i, 0] == pytest.approx(mu_direct, abs=1e-8)
