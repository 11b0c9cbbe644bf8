"""Problem model: admissibility, partial sums, overtaking comparisons."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horizon_pmp import catalog
from horizon_pmp.model import (
    ControlVariant,
    ControlSetSpec,
    InadmissibleTrajectoryError,
    ProblemSpec,
    SystemKind,
    Trajectory,
    check_admissibility,
    interior_controls,
    overtaking_compare,
    partial_sums,
)

from helpers import fsum_partial_sums


def _lq1():
    return catalog.catalog_problem("LQ1"), catalog.catalog_candidate("LQ1", 60)


def test_trajectory_shape_contract():
    with pytest.raises(ValueError):
        Trajectory(states=np.zeros((3, 1)), controls=np.zeros((3, 1)))
    traj = Trajectory(states=np.zeros((4, 2)), controls=np.zeros((3, 1)))
    assert traj.horizon == 2


def test_problem_dimension_validation():
    with pytest.raises(ValueError):
        ProblemSpec(n=0, d=1, sigma=np.zeros(0), kind=SystemKind.EQUATION,
                    controls=interior_controls(),
                    dynamics=lambda t, x, u: x, criterion=lambda t, x, u: 0.0,
                    H_max=10)
    with pytest.raises(ValueError):
        ControlSetSpec(variant=ControlVariant.INEQUALITIES, g_rows=())


def test_admissibility_of_catalog_candidates():
    for name in catalog.CATALOG_NAMES:
        prob = catalog.catalog_problem(name)
        traj = catalog.catalog_candidate(name, 25)
        report = check_admissibility(prob, traj)
        assert report.feasible, f"{name}: {report}"


def test_equation_violation_reported_with_stage_and_magnitude():
    prob, traj = _lq1()
    states = traj.states.copy()
    states[5] += 0.25
    bad = Trajectory(states=states, controls=traj.controls)
    report = check_admissibility(prob, bad)
    assert not report.feasible
    stages = {v[0] for v in report.violations}
    assert {4, 5} & stages  # the edit breaks the rows into and out of stage 5
    assert all(v[3] > 0 for v in report.violations)


def test_inequation_slack_is_one_sided():
    prob = catalog.catalog_problem("SLACK1")
    traj = catalog.catalog_candidate("SLACK1", 10)
    report = check_admissibility(prob, traj)
    assert report.feasible
    assert np.allclose(report.slack, 1.0)  # f(x,u) = x + 1 against constant x
    # pushing a state above the dynamics bound is a violation
    states = traj.states.copy()
    states[3, 0] = 2.0
    report = check_admissibility(prob, Trajectory(states=states, controls=traj.controls))
    assert not report.feasible


def test_partial_sums_match_compensated_summation():
    prob, traj = _lq1()
    hs = (10, 20, 40)
    ps = partial_sums(prob, traj, hs)
    oracle = fsum_partial_sums(prob, traj, hs)
    assert np.max(np.abs(ps.sums - oracle)) <= 1e-12
    assert ps.horizons == hs


def test_partial_sums_cauchy_flag_for_summable_tail():
    prob, traj = _lq1()
    ps = partial_sums(prob, traj, (30, 40, 50), cauchy_tol=1e-9)
    assert ps.cauchy  # geometric decay of the LQ stage cost


def test_overtaking_optimal_beats_perturbed_control():
    prob, traj = _lq1()
    controls = traj.controls.copy()
    controls[0] += 0.1
    states = [traj.states[0]]
    for t in range(len(controls)):
        states.append(prob.dynamics(t, states[-1], controls[t]))
    perturbed = Trajectory(states=np.array(states), controls=controls)
    cmp = overtaking_compare(prob, traj, perturbed, h_max=50)
    assert cmp.liminf_est > 0
    assert cmp.a_weakly_overtakes_b
    assert np.all(cmp.diffs[5:] > 0)


def test_overtaking_requires_admissible_inputs():
    prob, traj = _lq1()
    states = traj.states.copy()
    states[0] += 1.0  # breaks the pinned initial state
    bad = Trajectory(states=states, controls=traj.controls)
    with pytest.raises(InadmissibleTrajectoryError):
        overtaking_compare(prob, traj, bad, h_max=20)


@given(h=st.integers(min_value=1, max_value=40))
@settings(max_examples=25, deadline=None)
def test_partial_sums_are_prefix_sums(h):
    prob, traj = _lq1()
    ps = partial_sums(prob, traj, [h])
    stage_vals = [prob.criterion(t, traj.states[t], traj.controls[t])
                  for t in range(h + 1)]
    assert ps.sums[0] == pytest.approx(sum(stage_vals), abs=1e-12)
