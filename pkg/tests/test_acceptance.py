"""Acceptance suite: one test per criterion, tolerances pinned in-line.

Each test prints a single PASS line naming the criterion so the suite doubles
as a checklist; the asserts carry the actual tolerances.
"""

import dataclasses
import time

import numpy as np
import pytest

from horizon_pmp import catalog, verify
from horizon_pmp.catalog import AffineQuadraticData, affine_quadratic_problem
from horizon_pmp.certificate import Certificate, TheoremVariant, adjoint_forward, bound_sequence
from horizon_pmp.cli import main
from horizon_pmp.differentials import gateaux_matrix, stage_derivatives
from horizon_pmp.model import SystemKind, Trajectory
from horizon_pmp.qualification import (
    FunctionalFamily,
    SeparationOutcome,
    separation_check,
    span_co_disjoint_check,
)
from horizon_pmp.sweep import sweep
from horizon_pmp.truncation import oracle_kkt, reduce_to_finite_horizon, solve_multipliers

from helpers import hull_contains_zero, multiplier_gap, span_hull_intersect


def _solution(name, h, stages=None):
    prob = catalog.catalog_problem(name)
    traj = catalog.catalog_candidate(name, stages or (h + 2))
    fh = reduce_to_finite_horizon(prob, traj, h)
    derivs = [stage_derivatives(prob, traj, t) for t in range(h + 1)]
    return prob, traj, fh, derivs, solve_multipliers(fh, traj, derivs)


def test_criterion_01_gradient_correctness():
    start = time.perf_counter()
    for name in catalog.CATALOG_NAMES:
        data = catalog.catalog_data(name)
        prob = dataclasses.replace(
            catalog.catalog_problem(name),
            dynamics_dx=None, dynamics_du=None, criterion_dx=None, criterion_du=None)
        traj = catalog.catalog_candidate(name, 8)
        for t in (0, 2, 5):
            dv = stage_derivatives(prob, traj, t, step=1e-5)
            x, u = traj.states[t], traj.controls[t]
            pairs = [
                (dv.D1f, data.A), (dv.D2f, data.B),
                (dv.D1phi, -2 * data.beta ** t * (data.Q @ x)),
                (dv.D2phi, -2 * data.beta ** t * (data.R @ u)),
            ]
            if data.G is not None:
                pairs.append((dv.Dg, data.G))
            if data.E is not None:
                pairs.append((dv.De, data.E))
            for got, want in pairs:
                rel = np.max(np.abs(got - want)) / (1.0 + np.max(np.abs(want)))
                assert rel <= 1e-6
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"\nPASS criterion 1: finite-difference gradients match analytic "
          f"coefficients to 1e-6 ({elapsed:.2f}s)")


def test_criterion_02_separation_trichotomy():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    agree = 0
    for _ in range(200):
        dim = int(rng.integers(1, 5))
        rows = rng.normal(size=(int(rng.integers(1, 7)), dim))
        fam = FunctionalFamily(rows=rows)
        cert = separation_check(fam)
        assert cert.check(fam, tol=1e-9)
        in_hull = hull_contains_zero(rows)
        agree += (cert.outcome is SeparationOutcome.NOT_SEPARATED) == in_hull
    elapsed = time.perf_counter() - start
    assert agree == 200
    assert elapsed < 5.0
    print(f"\nPASS criterion 2: 200/200 separation outcomes match the "
          f"hull oracle, certificates verify to 1e-9 ({elapsed:.2f}s)")


def test_criterion_03_span_hull_disjointness():
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    agree = 0
    for _ in range(100):
        dim = int(rng.integers(2, 5))
        eq = FunctionalFamily(rows=rng.normal(size=(1, dim)))
        ineq = FunctionalFamily(rows=rng.normal(size=(int(rng.integers(1, 6)), dim)))
        cert = span_co_disjoint_check(eq, ineq)
        assert cert.check(ineq, equalities=eq, tol=1e-9)
        agree += (cert.outcome is SeparationOutcome.INTERSECTING) \
            == span_hull_intersect(eq.rows, ineq.rows)
    elapsed = time.perf_counter() - start
    assert agree == 100
    assert elapsed < 5.0
    print(f"\nPASS criterion 3: 100/100 span-hull outcomes match the "
          f"projection oracle ({elapsed:.2f}s)")


def test_criterion_04_oracle_equivalence():
    start = time.perf_counter()
    for name in ("LQ1", "CON1", "MIX1"):
        _, traj, fh, derivs, tm = _solution(name, 10)
        ok = oracle_kkt(fh, traj)
        assert tm.accepted and ok.accepted, name
        assert multiplier_gap(tm, ok) <= 1e-5, name
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(f"\nPASS criterion 4: stacked solve and KKT oracle agree to 1e-5 "
          f"on LQ1/CON1/MIX1 at h=10 ({elapsed:.2f}s)")


def test_criterion_05_adjoint_recursion_consistency():
    _, _, _, derivs, tm = _solution("LQ1", 10)
    p = adjoint_forward(tm.lambda0, tm.p[0], derivs, T=11)
    gap = float(np.max(np.abs(p - tm.p[:11])))
    assert gap <= 1e-8
    print(f"\nPASS criterion 5: adjoint recursion reproduces the stacked "
          f"p_t to 1e-8 on LQ1, t <= 11 (gap {gap:.2e})")


def test_criterion_06_normalization_and_signs():
    worst_norm, worst_sign = 0.0, 0.0
    for name in catalog.CATALOG_NAMES:
        for h in (5, 10, 15):
            _, _, _, _, tm = _solution(name, h)
            assert tm.accepted, (name, h)
            worst_norm = max(worst_norm,
                             abs(abs(tm.lambda0) + np.linalg.norm(tm.p[0]) - 1.0))
            signs = [-tm.lambda0, float(np.max(-tm.mu, initial=-np.inf))]
            if tm.variant.adjoint_signed:
                signs.append(float(np.max(-tm.p)))
            worst_sign = max(worst_sign, max(signs))
    assert worst_norm <= 1e-10
    assert worst_sign <= 1e-12
    print(f"\nPASS criterion 6: |lambda0|+||p_1|| = 1 to 1e-10 and signs to "
          f"1e-12 on every emitted run (norm {worst_norm:.2e}, sign {worst_sign:.2e})")


def test_criterion_07_slackness():
    _, _, _, _, tm = _solution("SLACK1", 12)
    assert tm.accepted
    assert np.max(np.abs(tm.p)) <= 1e-10
    # CON1 with a mixed-activity candidate: positive control early, floor later
    prob = catalog.catalog_problem("CON1")
    controls = np.zeros((14, 1))
    controls[:3] = 0.1
    states = [prob.sigma]
    for t in range(14):
        states.append(prob.dynamics(t, states[-1], controls[t]))
    cand = Trajectory(states=np.array(states), controls=controls)
    fh = reduce_to_finite_horizon(prob, cand, 12)
    derivs = [stage_derivatives(prob, cand, t) for t in range(13)]
    tm = solve_multipliers(fh, cand, derivs)
    for t in range(13):
        g_val = float(controls[t][0])
        if g_val > 1e-8:
            assert tm.mu[t, 0] == 0.0  # inactive stages carry exactly zero
        assert abs(tm.mu[t, 0] * g_val) <= 1e-10
    print("\nPASS criterion 7: SLACK1 adjoints vanish to 1e-10; CON1 "
          "inactive mu exactly 0, mu*g defect <= 1e-10")


def test_criterion_08_boundedness_envelope():
    prob = catalog.catalog_problem("LQ1")
    traj = catalog.catalog_candidate("LQ1", 65)
    derivs = [stage_derivatives(prob, traj, t) for t in range(61)]
    bs = bound_sequence(derivs, 31)
    assert np.all(bs.gamma == pytest.approx(0.5))
    worst = -np.inf
    for h in (15, 30, 45, 60):
        fh = reduce_to_finite_horizon(prob, traj, h)
        tm = solve_multipliers(fh, traj, derivs[:h + 1])
        assert tm.accepted
        upto = min(30, tm.p.shape[0])
        gap = np.max(np.linalg.norm(tm.p[:upto], axis=1) - bs.zeta[:upto])
        worst = max(worst, float(gap))
    assert worst <= 1e-9
    print(f"\nPASS criterion 8: ||p_t^h|| <= zeta_t + 1e-9 on LQ1 for "
          f"t <= 30, h <= 60 (worst margin {worst:.2e})")


def test_criterion_09_horizon_convergence():
    start = time.perf_counter()
    prob = catalog.catalog_problem("LQ1")
    traj = catalog.catalog_candidate("LQ1")
    result = sweep(prob, traj, (10, 20, 40, 80))
    assert result.converged
    for profile in result.cauchy_profile.values():
        assert np.all(profile[-3:] <= 1e-6)
    report = verify(prob, traj, result.limits, tol=1e-6)
    assert report.passed, report.summary()
    assert result.limits.variant is TheoremVariant.THM31
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    print(f"\nPASS criterion 9: LQ1 sweep (10,20,40,80) Cauchy to 1e-6 and "
          f"limits verify at 1e-6 ({elapsed:.2f}s)")


def test_criterion_10_variant_semantics():
    # the sign-flipped LQ1 twin has genuinely negative costates along its optimum
    data = catalog.catalog_data("LQ1")
    twin = AffineQuadraticData(
        A=data.A, B=data.B, c=data.c, Q=data.Q, R=data.R, beta=data.beta,
        sigma=-data.sigma, kind=SystemKind.EQUATION, H_max=data.H_max,
        name="LQ1-twin")
    prob = affine_quadratic_problem(twin)
    base = catalog.catalog_candidate("LQ1", 20)
    traj = Trajectory(states=-base.states, controls=-base.controls)
    fh = reduce_to_finite_horizon(prob, traj, 10)
    derivs = [stage_derivatives(prob, traj, t) for t in range(11)]
    tm = solve_multipliers(fh, traj, derivs, TheoremVariant.THM48)
    assert tm.accepted and np.min(tm.p) < -1e-3
    kwargs = dict(lambda0=tm.lambda0, p=tm.p[:10], mu=tm.mu[:9], eq_lambda=tm.eq_lambda[:9])
    strict = verify(prob, traj, Certificate(variant=TheoremVariant.THM31, **kwargs), tol=1e-6)
    relaxed = verify(prob, traj, Certificate(variant=TheoremVariant.THM48, **kwargs), tol=1e-6)
    assert not strict.passed and not strict.entries["Si"].passed
    assert strict.entries["AE"].passed and strict.entries["WM"].passed
    assert relaxed.passed
    print("\nPASS criterion 10: negative costates rejected by the interior "
          "variant, accepted by the equation variant with AE/WM intact")


def test_criterion_11_csv_determinism(tmp_path):
    prob_path = tmp_path / "lq1.prob"
    traj_path = tmp_path / "lq1.traj"
    assert main(["catalog", "emit", "LQ1", "--out", str(prob_path),
                 "--trajectory-out", str(traj_path), "--stages", "45"]) == 0
    outputs = []
    for tag in ("a", "b"):
        csv_path = tmp_path / f"{tag}.csv"
        assert main(["sweep", "--problem", str(prob_path),
                     "--trajectory", str(traj_path),
                     "--h", "10,20,40", "--out", str(csv_path)]) == 0
        outputs.append(csv_path.read_bytes())
    assert outputs[0] == outputs[1]
    print("\nPASS criterion 11: repeated sweep runs produce byte-identical CSV")
