"""Multi-horizon sweeps and limit-certificate assembly.

The classical existence arguments pull convergent subsequences out of the
normalized multiplier sphere.  At desk scale that step is replaced by an
explicit sweep: solve every truncation in an increasing horizon list, align
normalization signs, and demand Cauchy behaviour of the tail over a tracked
stage window.  When the tail settles, the last run's values are frozen as the
limit certificate and the adjoint recursion extends its costate rows forward.

``recover_coefficients`` is the companion tool for multiplier sequences that
are only known through their linear combinations: with an independent row
basis, least squares recovers the coefficient sequences and flags whether
each coefficient is itself Cauchy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from horizon_pmp.certificate import Certificate, TheoremVariant, adjoint_forward
from horizon_pmp.differentials import StageDerivatives, stage_derivatives
from horizon_pmp.model import ProblemSpec, Trajectory
from horizon_pmp.qualification import FunctionalFamily
from horizon_pmp.truncation import (
    TruncatedMultipliers,
    default_variant,
    reduce_to_finite_horizon,
    solve_multipliers,
)

DEFAULT_CAUCHY_TOL = 1e-6
_CAUCHY_PAIRS = 3


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Outcome of a horizon sweep.

    ``cauchy_profile`` maps each tracked quantity to the norms of its
    successive differences across the sweep; ``limits`` is populated only
    when the tail of every profile sits below the Cauchy tolerance.
    """

    runs: tuple[tuple[int, TruncatedMultipliers], ...]
    converged: bool
    limits: Optional[Certificate]
    cauchy_profile: dict[str, np.ndarray]
    window: int
    failed_h: tuple[int, ...] = ()
    cauchy_tol: float = DEFAULT_CAUCHY_TOL


def _align_sign(tm: TruncatedMultipliers) -> TruncatedMultipliers:
    """Flip the whole multiplier list if the dominant (lambda0, p_1) coordinate
    is negative, so runs of opposite nullspace orientation compare directly.

    A run with lambda0 > 0 is already canonically oriented (the sign
    conditions pin it), so the dominant-coordinate rule only decides the
    orientation of abnormal runs.
    """
    if tm.lambda0 > 0.0:
        return tm
    head = np.concatenate([[tm.lambda0], tm.p[0]])
    dom = int(np.argmax(np.abs(head)))
    if head[dom] >= 0.0:
        return tm
    return TruncatedMultipliers(
        h=tm.h, lambda0=-tm.lambda0, p=-tm.p, mu=-tm.mu, eq_lambda=-tm.eq_lambda,
        residuals=tm.residuals, accepted=tm.accepted, variant=tm.variant,
        message=tm.message)


def sweep(
    problem: ProblemSpec,
    candidate: Trajectory,
    h_list: Sequence[int],
    variant: Optional[TheoremVariant] = None,
    cauchy_tol: float = DEFAULT_CAUCHY_TOL,
    extend_to: Optional[int] = None,
    activity_tol: float = 1e-8,
) -> SweepResult:
    """Solve each truncation in h_list and detect multiplier convergence.

    The tracked window is W = min(h_list) - 1 so every tracked p_t and mu_t
    exists in every run.  Convergence requires every run to carry an accepted
    certificate and the last ``_CAUCHY_PAIRS`` successive differences of each
    tracked quantity to stay within cauchy_tol.  The limit certificate copies
    the final run over the window; ``extend_to`` grows its costate rows past
    W with the adjoint recursion.
    """
    h_list = [int(h) for h in h_list]
    if len(h_list) < 2:
        raise ValueError("h_list needs at least two horizons")
    if any(b <= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h_list must be strictly increasing")
    if h_list[0] < 2:
        raise ValueError("smallest horizon must be >= 2")
    if h_list[-1] + 1 > problem.H_max:
        raise ValueError(f"max(h_list)+1 = {h_list[-1] + 1} exceeds H_max={problem.H_max}")
    if variant is None:
        variant = default_variant(problem)

    h_top = h_list[-1]
    derivs = [stage_derivatives(problem, candidate, t) for t in range(h_top + 1)]

    runs: list[tuple[int, TruncatedMultipliers]] = []
    failed: list[int] = []
    for h in h_list:
        fh = reduce_to_finite_horizon(problem, candidate, h)
        tm = solve_multipliers(fh, candidate, derivs[:h + 1], variant,
                               activity_tol=activity_tol)
        tm = _align_sign(tm)
        runs.append((h, tm))
        if not tm.accepted:
            failed.append(h)

    W = h_list[0] - 1
    lam = np.array([tm.lambda0 for _, tm in runs])
    p_w = np.array([tm.p[:W].reshape(-1) for _, tm in runs])
    mu_w = np.array([tm.mu[:W].reshape(-1) for _, tm in runs])
    eq_w = np.array([tm.eq_lambda[:W].reshape(-1) for _, tm in runs])

    def diffs(series: np.ndarray) -> np.ndarray:
        if series.ndim == 1:
            return np.abs(np.diff(series))
        if series.shape[1] == 0:
            return np.zeros(series.shape[0] - 1)
        return np.max(np.abs(np.diff(series, axis=0)), axis=1)

    profile = {"lambda0": diffs(lam), "p": diffs(p_w),
               "mu": diffs(mu_w), "eq_lambda": diffs(eq_w)}

    tail = max(1, min(_CAUCHY_PAIRS, len(h_list) - 1))
    cauchy_ok = all(bool(np.all(v[-tail:] <= cauchy_tol)) for v in profile.values())
    converged = cauchy_ok and not failed

    limits: Optional[Certificate] = None
    if converged:
        last = runs[-1][1]
        p_rows = last.p[:W].copy()
        if extend_to is not None and extend_to > W:
            if extend_to > h_top:
                raise ValueError(f"extend_to={extend_to} exceeds available stage "
                                 f"derivatives (max {h_top})")
            p_rows = adjoint_forward(last.lambda0, last.p[0], derivs, extend_to)
        limits = Certificate(
            lambda0=last.lambda0, p=p_rows, mu=last.mu[:W].copy(),
            eq_lambda=last.eq_lambda[:W].copy(), variant=variant)

    return SweepResult(runs=tuple(runs), converged=converged, limits=limits,
                       cauchy_profile=profile, window=W,
                       failed_h=tuple(failed), cauchy_tol=cauchy_tol)


@dataclass(frozen=True, eq=False)
class CoefficientRecovery:
    """Least-squares coefficients of each combo in the basis rows."""

    coefficients: np.ndarray       # (n_combos, n_rows)
    residuals: np.ndarray          # (n_combos,)
    cauchy_flags: np.ndarray       # (n_rows,) bool
    cauchy_tol: float


def recover_coefficients(
    basis: FunctionalFamily,
    combos: Sequence[np.ndarray],
    cauchy_tol: float = DEFAULT_CAUCHY_TOL,
    rank_tol: float = 1e-10,
) -> CoefficientRecovery:
    """Recover coefficient sequences of linear combinations in an independent basis.

    Each combo is decomposed by least squares on the basis rows; per-index
    Cauchy flags report whether the recovered coefficient sequence settles
    (its successive differences stay within cauchy_tol).
    """
    rows = np.asarray(basis.rows, dtype=float)
    s = np.linalg.svd(rows, compute_uv=False)
    if s.size == 0 or s[-1] <= rank_tol * max(s[0], 1.0):
        raise ValueError("basis rows are linearly dependent to rank tolerance; "
                         "coefficient recovery is not well posed")
    combos_arr = np.atleast_2d(np.asarray(list(combos), dtype=float))
    if combos_arr.shape[1] != rows.shape[1]:
        raise ValueError(f"combos live in R^{combos_arr.shape[1]}, "
                         f"basis in R^{rows.shape[1]}")
    coeffs, _, _, _ = np.linalg.lstsq(rows.T, combos_arr.T, rcond=None)
    coeffs = coeffs.T
    resid = np.linalg.norm(combos_arr - coeffs @ rows, axis=1)
    if coeffs.shape[0] >= 2:
        step = np.abs(np.diff(coeffs, axis=0))
        flags = np.all(step[-min(_CAUCHY_PAIRS, step.shape[0]):] <= cauchy_tol, axis=0)
    else:
        flags = np.ones(coeffs.shape[1], dtype=bool)
    return CoefficientRecovery(coefficients=coeffs, residuals=resid,
                               cauchy_flags=np.asarray(flags, dtype=bool),
                               cauchy_tol=cauchy_tol)
