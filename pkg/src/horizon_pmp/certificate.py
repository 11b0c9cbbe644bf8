"""Infinite-horizon certificates and their verification.

A certificate is a normalized multiplier list (lambda0, adjoint rows p_t,
inequality multipliers mu_t, equality multipliers lambda_t) attached to one
of five theorem variants.  ``verify`` checks the variant's conclusions
against a problem and candidate over a finite window: nontriviality (NN),
signs (Si), complementary slackness (Sl), the adjoint equation (AE), and the
weak maximum condition (WM).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from horizon_pmp.differentials import StageDerivatives, monotonicity_check, stage_derivatives
from horizon_pmp.model import (
    ControlVariant,
    ProblemSpec,
    SystemKind,
    Trajectory,
    check_admissibility,
    InadmissibleTrajectoryError,
)


class TheoremVariant(Enum):
    """Which necessary-conditions variant a certificate claims to satisfy.

    THM31/THM32: interior controls, inequation system (THM32 swaps the
    invertibility hypothesis for the monotone sign pattern).  THM43:
    inequality-constrained controls.  THM47: mixed constraints.  THM48:
    equation system with mixed constraints; the adjoint loses its sign and
    the dynamic slackness rows drop out.
    """

    THM31 = "Thm31"
    THM32 = "Thm32"
    THM43 = "Thm43"
    THM47 = "Thm47"
    THM48 = "Thm48"

    @property
    def adjoint_signed(self) -> bool:
        return self is not TheoremVariant.THM48

    @property
    def checks_dynamic_slackness(self) -> bool:
        return self is not TheoremVariant.THM48

    @classmethod
    def parse(cls, text: str) -> "TheoremVariant":
        key = text.strip().lower().removeprefix("thm")
        for v in cls:
            if v.value.lower().removeprefix("thm") == key or v.value.lower() == text.strip().lower():
                return v
        raise ValueError(f"unknown variant {text!r}; expected one of "
                         f"{[v.value for v in cls]}")


class VariantMismatchError(ValueError):
    """Certificate variant is incompatible with the problem's structure."""


@dataclass(frozen=True, eq=False)
class Certificate:
    """Multiplier list covering stages 1..T (adjoint) and 0..T_mu-1 (controls)."""

    lambda0: float
    p: np.ndarray          # (T, n): rows p_1..p_T
    mu: np.ndarray         # (T_c, m_i): rows mu_0..mu_{T_c-1}
    eq_lambda: np.ndarray  # (T_c, m_e)
    variant: TheoremVariant

    def __post_init__(self):
        object.__setattr__(self, "p", np.atleast_2d(np.asarray(self.p, dtype=float)))
        mu = np.asarray(self.mu, dtype=float)
        eq = np.asarray(self.eq_lambda, dtype=float)
        object.__setattr__(self, "mu", mu.reshape(mu.shape[0], -1) if mu.size else mu.reshape(0, 0))
        object.__setattr__(self, "eq_lambda",
                           eq.reshape(eq.shape[0], -1) if eq.size else eq.reshape(0, 0))

    @property
    def window(self) -> int:
        """Largest t with p_t materialized."""
        return self.p.shape[0]


@dataclass(frozen=True)
class BoundSequence:
    """A-priori adjoint envelope from the monotone diagonal bounds.

    gamma[t-1] is gamma_t for t = 1..T-1; zeta[t-1] is zeta_t for t = 1..T
    with zeta_1 = 1 and zeta_{t+1} = (zeta_t + ||D1phi_t||) / gamma_t.
    """

    gamma: np.ndarray
    zeta: np.ndarray

    def zeta_at(self, t: int) -> float:
        return float(self.zeta[t - 1])


class SingularStateDifferentialError(ValueError):
    def __init__(self, t: int):
        super().__init__(f"state differential D1f at stage t={t} is singular")
        self.t = t


def adjoint_forward(
    lambda0: float,
    p1: np.ndarray,
    derivs: Sequence[StageDerivatives],
    T: int,
) -> np.ndarray:
    """Run the adjoint recursion p_{t+1} = (p_t - lambda0 D1phi_t) o D1f_t^{-1}.

    ``derivs[t]`` holds the stage-t differentials; the recursion consumes
    stages 1..T-1 and returns the rows p_1..p_T.  Row-vector composition is
    implemented by solving against the transposed matrix.
    """
    p1 = np.asarray(p1, dtype=float).reshape(-1)
    n = p1.size
    out = np.zeros((T, n))
    out[0] = p1
    for t in range(1, T):
        dv = derivs[t]
        rhs = out[t - 1] - lambda0 * dv.D1phi
        try:
            out[t] = np.linalg.solve(dv.D1f.T, rhs)
        except np.linalg.LinAlgError:
            raise SingularStateDifferentialError(t) from None
    return out


def bound_sequence(derivs: Sequence[StageDerivatives], T: int) -> BoundSequence:
    """Envelope zeta_t dominating ||p_t|| under the monotone sign pattern."""
    gamma = np.zeros(T - 1)
    zeta = np.zeros(T)
    zeta[0] = 1.0
    for t in range(1, T):
        rep = monotonicity_check(derivs[t].D1f)
        if not rep.pos_diag:
            raise ValueError(f"gamma_{t} = {rep.gamma_t:g} is not positive; "
                             "envelope undefined")
        gamma[t - 1] = rep.gamma_t
        zeta[t] = (zeta[t - 1] + float(np.linalg.norm(derivs[t].D1phi))) / rep.gamma_t
    return BoundSequence(gamma=gamma, zeta=zeta)


@dataclass(frozen=True)
class ConditionCheck:
    passed: bool
    worst_defect: float
    locus: Optional[tuple] = None


@dataclass(frozen=True)
class ConditionReport:
    entries: dict[str, ConditionCheck]
    window: int
    variant: TheoremVariant
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.entries.values())

    def summary(self) -> str:
        lines = [f"certificate conditions ({self.variant.value}, window t <= {self.window}):"]
        for name, c in self.entries.items():
            locus = f" at {c.locus}" if c.locus is not None else ""
            lines.append(
                f"  {name:>3}: {'pass' if c.passed else 'FAIL'}"
                f"  worst defect {c.worst_defect:.3e}{locus}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        lines.append(f"  overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


_VARIANT_NOTES = (
    "AE checked for t >= 1 in all variants; p_0 has no home in any conclusion",
    "numeric differentials cannot distinguish Gateaux from Frechet hypotheses",
)


def _check_variant_compat(problem: ProblemSpec, variant: TheoremVariant) -> None:
    cv = problem.controls.variant
    if variant in (TheoremVariant.THM31, TheoremVariant.THM32) and cv is not ControlVariant.INTERIOR:
        raise VariantMismatchError(f"{variant.value} requires interior controls, got {cv.value}")
    if variant is TheoremVariant.THM43 and cv is not ControlVariant.INEQUALITIES:
        raise VariantMismatchError(f"{variant.value} requires inequality controls, got {cv.value}")
    if variant is TheoremVariant.THM47 and cv is not ControlVariant.MIXED:
        raise VariantMismatchError(f"{variant.value} requires mixed controls, got {cv.value}")
    if variant is TheoremVariant.THM48 and problem.kind is not SystemKind.EQUATION:
        raise VariantMismatchError(f"{variant.value} requires an equation system")


def verify(
    problem: ProblemSpec,
    candidate: Trajectory,
    cert: Certificate,
    tol: float = 1e-6,
    tol_nn: float = 1e-6,
    feasibility_tol: float = 1e-9,
    derivs: Optional[Sequence[StageDerivatives]] = None,
) -> ConditionReport:
    """Check the certificate's variant conditions over its materialized window.

    Relative tolerances use scale = 1 + max(||p_t||, ||p_{t+1}||,
    |lambda0| * ||D1phi_t||) so that defects are judged against the size of
    the quantities entering each equation.
    """
    _check_variant_compat(problem, cert.variant)
    report = check_admissibility(problem, candidate, feasibility_tol)
    if not report.feasible:
        raise InadmissibleTrajectoryError("candidate is not admissible", report)

    T = cert.window
    T_c = max(cert.mu.shape[0], cert.eq_lambda.shape[0])
    if T > candidate.horizon + 1:
        raise ValueError(f"certificate window {T} exceeds candidate horizon")
    m_i, m_e = problem.controls.m_i, problem.controls.m_e
    if m_i and cert.mu.shape[0] and cert.mu.shape[1] != m_i:
        raise VariantMismatchError("mu width does not match the control rows")
    if m_e and cert.eq_lambda.shape[0] and cert.eq_lambda.shape[1] != m_e:
        raise VariantMismatchError("eq_lambda width does not match the control rows")
    if derivs is None:
        derivs = [stage_derivatives(problem, candidate, t) for t in range(T)]

    lam0, p = cert.lambda0, cert.p
    entries: dict[str, ConditionCheck] = {}

    nn_mag = abs(lam0) + float(np.linalg.norm(p[0]))
    entries["NN"] = ConditionCheck(nn_mag >= tol_nn, nn_mag)

    # Si: lambda0 >= 0 always; p >= 0 unless THM48; mu >= 0 whenever present.
    worst, locus = -lam0, ("lambda0",)
    if cert.variant.adjoint_signed:
        for t in range(T):
            a = int(np.argmin(p[t]))
            if -p[t][a] > worst:
                worst, locus = -p[t][a], ("p", t + 1, a)
    for t in range(min(T_c, cert.mu.shape[0])):
        if cert.mu.shape[1] == 0:
            break
        k = int(np.argmin(cert.mu[t]))
        if -cert.mu[t][k] > worst:
            worst, locus = -cert.mu[t][k], ("mu", t, k)
    entries["Si"] = ConditionCheck(worst <= tol, max(worst, 0.0), locus if worst > tol else None)

    # Sl: dynamic slackness (skipped for THM48) and mu-slackness.
    worst, locus = 0.0, None
    if cert.variant.checks_dynamic_slackness:
        for t in range(T):
            # the multiplier of dynamic row t is p_{t+1}, stored at p[t]
            f_val = np.asarray(problem.dynamics(t, candidate.states[t], candidate.controls[t]))
            gaps = np.abs(p[t] * (f_val - candidate.states[t + 1]))
            a = int(np.argmax(gaps))
            if gaps[a] > worst:
                worst, locus = float(gaps[a]), ("dynamics", t, a)
    for t in range(cert.mu.shape[0]):
        for k, row in enumerate(problem.controls.g_rows):
            gap = abs(cert.mu[t][k] * float(row.fn(t, candidate.controls[t])))
            if gap > worst:
                worst, locus = gap, ("g", t, k)
    entries["Sl"] = ConditionCheck(worst <= tol, worst, locus if worst > tol else None)

    # AE for t = 1..T-1.
    worst, locus = 0.0, None
    for t in range(1, T - 1 + 1):
        if t + 1 > T:
            break
        dv = derivs[t]
        defect = p[t - 1] - (p[t] @ dv.D1f + lam0 * dv.D1phi)
        scale = 1.0 + max(np.linalg.norm(p[t - 1]), np.linalg.norm(p[t]),
                          abs(lam0) * np.linalg.norm(dv.D1phi))
        rel = float(np.linalg.norm(defect)) / scale
        if rel > worst:
            worst, locus = rel, ("AE", t)
    entries["AE"] = ConditionCheck(worst <= tol, worst, locus if worst > tol else None)

    # WM for t = 0..min(T-1, T_c)-1 where multipliers are materialized.
    worst, locus = 0.0, None
    wm_stages = T - 1 if (m_i == 0 and m_e == 0) else min(T - 1, T_c)
    for t in range(wm_stages):
        dv = derivs[t]
        expr = p[t] @ dv.D2f + lam0 * dv.D2phi
        if m_e and cert.eq_lambda.shape[0] > t:
            expr = expr + cert.eq_lambda[t] @ dv.De
        if m_i and cert.mu.shape[0] > t:
            expr = expr + cert.mu[t] @ dv.Dg
        scale = 1.0 + max(np.linalg.norm(p[t]), abs(lam0) * np.linalg.norm(dv.D2phi))
        rel = float(np.linalg.norm(expr)) / scale
        if rel > worst:
            worst, locus = rel, ("WM", t)
    entries["WM"] = ConditionCheck(worst <= tol, worst, locus if worst > tol else None)

    return ConditionReport(entries=entries, window=T, variant=cert.variant,
                           notes=_VARIANT_NOTES)
