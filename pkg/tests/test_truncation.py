"""Truncated multiplier solves: stacked system vs the raw KKT oracle."""

import numpy as np
import pytest

from horizon_pmp import catalog
from horizon_pmp.certificate import TheoremVariant
from horizon_pmp.differentials import stage_derivatives
from horizon_pmp.model import InadmissibleTrajectoryError, Trajectory
from horizon_pmp.truncation import (
    default_variant,
    oracle_kkt,
    reduce_to_finite_horizon,
    solve_multipliers,
)

from helpers import multiplier_gap


def _setup(name, h, stages=None):
    prob = catalog.catalog_problem(name)
    traj = catalog.catalog_candidate(name, stages or (h + 2))
    fh = reduce_to_finite_horizon(prob, traj, h)
    derivs = [stage_derivatives(prob, traj, t) for t in range(h + 1)]
    return prob, traj, fh, derivs


def test_reduction_pins_both_endpoints():
    prob, traj, fh, _ = _setup("LQ1", 5)
    assert fh.h == 5
    assert np.array_equal(fh.terminal_state, traj.states[6])
    assert np.array_equal(prob.sigma, traj.states[0])


def test_reduction_rejects_short_or_inadmissible_candidates():
    prob = catalog.catalog_problem("LQ1")
    traj = catalog.catalog_candidate("LQ1", 4)
    with pytest.raises(ValueError):
        reduce_to_finite_horizon(prob, traj, 10)
    states = traj.states.copy()
    states[2] += 1.0
    with pytest.raises(InadmissibleTrajectoryError):
        reduce_to_finite_horizon(prob, Trajectory(states=states, controls=traj.controls), 3)


def test_slackness_collapses_adjoint_on_slack1():
    _, traj, fh, derivs = _setup("SLACK1", 8)
    tm = solve_multipliers(fh, traj, derivs)
    assert tm.accepted
    assert tm.lambda0 == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(tm.p)) <= 1e-12


@pytest.mark.parametrize("name", ["LQ1", "CON1", "MIX1"])
def test_stacked_solve_matches_kkt_oracle(name):
    _, traj, fh, derivs = _setup(name, 10)
    tm = solve_multipliers(fh, traj, derivs)
    ok = oracle_kkt(fh, traj)
    assert tm.accepted and ok.accepted
    assert tm.variant is ok.variant
    assert multiplier_gap(tm, ok) <= 1e-5


def test_perturbed_candidate_yields_no_certificate_on_both_paths():
    prob = catalog.catalog_problem("LQ1")
    traj = catalog.catalog_candidate("LQ1", 12)
    controls = traj.controls.copy()
    controls[4] += 0.05  # break stationarity mid-window
    states = [traj.states[0]]
    for t in range(len(controls)):
        states.append(prob.dynamics(t, states[-1], controls[t]))
    bad = Trajectory(states=np.array(states), controls=controls)
    fh = reduce_to_finite_horizon(prob, bad, 10)
    derivs = [stage_derivatives(prob, bad, t) for t in range(11)]
    tm = solve_multipliers(fh, bad, derivs)
    ok = oracle_kkt(fh, bad)
    assert not tm.accepted and not ok.accepted
    assert tm.residuals["max"] > 1e-3
    assert ok.residuals["max"] > 1e-3
    assert "no certificate" in tm.message


def test_normalization_and_signs_of_every_accepted_run():
    for name in catalog.CATALOG_NAMES:
        for h in (5, 10, 15):
            _, traj, fh, derivs = _setup(name, h)
            tm = solve_multipliers(fh, traj, derivs)
            assert tm.accepted, (name, h)
            norm = abs(tm.lambda0) + float(np.linalg.norm(tm.p[0]))
            assert abs(norm - 1.0) <= 1e-10, (name, h)
            assert tm.lambda0 >= -1e-12
            assert np.min(tm.mu, initial=0.0) >= -1e-12
            if tm.variant.adjoint_signed:
                assert np.min(tm.p) >= -1e-12, (name, h)


def test_default_variants_follow_problem_structure():
    assert default_variant(catalog.catalog_problem("LQ1")) is TheoremVariant.THM31
    assert default_variant(catalog.catalog_problem("SLACK1")) is TheoremVariant.THM31
    assert default_variant(catalog.catalog_problem("CON1")) is TheoremVariant.THM48
    assert default_variant(catalog.catalog_problem("MIX1")) is TheoremVariant.THM48


def test_con1_multiplier_signs_and_slackness():
    _, traj, fh, derivs = _setup("CON1", 10)
    tm = solve_multipliers(fh, traj, derivs)
    assert tm.accepted
    # active floor u >= 0 at every stage: mu picks up the stationarity defect
    assert np.all(tm.mu >= -1e-12)
    assert np.all(tm.p[:-1] <= 1e-12)  # unsigned adjoint runs negative here
    for t in range(11):
        g_val = float(traj.controls[t][0])
        assert abs(tm.mu[t, 0] * g_val) <= 1e-10


def test_variant_precondition_rejects_singular_state_differential():
    prob = catalog.catalog_problem("LQ1")
    traj = catalog.catalog_candidate("LQ1", 6)
    fh = reduce_to_finite_horizon(prob, traj, 4)
    derivs = [stage_derivatives(prob, traj, t) for t in range(5)]
    broken = [derivs[0]] + [
        type(d)(D1f=np.zeros((1, 1)), D2f=d.D2f, D1phi=d.D1phi,
                D2phi=d.D2phi, Dg=d.Dg, De=d.De)
        for d in derivs[1:]
    ]
    with pytest.raises(ValueError, match="invertible"):
        solve_multipliers(fh, traj, broken, TheoremVariant.THM31)


def test_oracle_horizon_cap():
    _, traj, fh, _ = _setup("LQ1", 20, stages=25)
    with pytest.raises(ValueError, match="oracle"):
        oracle_kkt(fh, traj)
