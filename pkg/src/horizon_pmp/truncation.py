"""Finite-horizon truncation and multiplier solves.

``reduce_to_finite_horizon`` pins both endpoints of a candidate and copies
the stage data.  ``solve_multipliers`` assembles the truncation's first-order
system (adjoint equations, weak-maximum stationarity, complementary
slackness) as one homogeneous linear system in the full multiplier list,
extracts its nullspace, picks the sign-feasible direction maximizing the
normal multiplier, and normalizes on the sphere |lambda0| + ||p_1|| = 1.
``oracle_kkt`` is the independent check: it differentiates the monolithic
finite-horizon program numerically and solves the raw Lagrangian
stationarity system with the identical canonicalization.

Both solvers return "no certificate at horizon h" as a value (accepted =
False) rather than an exception: necessary conditions can fail for
non-optimal candidates, and that failure is the diagnostic output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from horizon_pmp.certificate import TheoremVariant
from horizon_pmp.differentials import (
    StageDerivatives,
    invertibility_check,
    monotonicity_check,
    stage_derivatives,
)
from horizon_pmp.model import (
    ControlVariant,
    InadmissibleTrajectoryError,
    ProblemSpec,
    SystemKind,
    Trajectory,
    check_admissibility,
)
from horizon_pmp.qualification import active_set

DEFAULT_ACTIVITY_TOL = 1e-8
RESIDUAL_THRESHOLD_FACTOR = 1e-7
ORACLE_MAX_HORIZON = 15


@dataclass(frozen=True, eq=False)
class FiniteHorizonProblem:
    """Stages 0..h of the parent problem with both endpoints pinned."""

    problem: ProblemSpec
    h: int
    terminal_state: np.ndarray

    @property
    def kind(self) -> SystemKind:
        return self.problem.kind


def default_variant(problem: ProblemSpec) -> TheoremVariant:
    """The theorem variant matching the problem's structure."""
    if problem.kind is SystemKind.EQUATION:
        if problem.controls.variant is ControlVariant.INTERIOR:
            return TheoremVariant.THM31
        return TheoremVariant.THM48
    return {
        ControlVariant.INTERIOR: TheoremVariant.THM31,
        ControlVariant.INEQUALITIES: TheoremVariant.THM43,
        ControlVariant.MIXED: TheoremVariant.THM47,
    }[problem.controls.variant]


def reduce_to_finite_horizon(
    problem: ProblemSpec,
    candidate: Trajectory,
    h: int,
    feasibility_tol: float = 1e-9,
) -> FiniteHorizonProblem:
    """Truncate at horizon h, pinning x_0 = sigma and x_{h+1} from the candidate."""
    if h < 0:
        raise ValueError("horizon must be nonnegative")
    if candidate.horizon < h:
        raise ValueError(
            f"candidate materialized to stage {candidate.horizon}, needs h={h}")
    report = check_admissibility(problem, candidate, feasibility_tol)
    if not report.feasible:
        raise InadmissibleTrajectoryError("candidate is not admissible", report)
    return FiniteHorizonProblem(
        problem=problem, h=h, terminal_state=candidate.states[h + 1].copy())


@dataclass(frozen=True, eq=False)
class TruncatedMultipliers:
    """Normalized multipliers of a truncation, or the best failing direction.

    ``p`` rows are p_1 .. p_{h+1}; ``mu``/``eq_lambda`` rows cover stages
    0..h with inactive inequality multipliers identically zero.  ``accepted``
    is False when no sign-feasible normalized direction meets the residual
    threshold; ``residuals['max']`` then carries the best residual found.
    """

    h: int
    lambda0: float
    p: np.ndarray
    mu: np.ndarray
    eq_lambda: np.ndarray
    residuals: dict
    accepted: bool
    variant: TheoremVariant
    message: str = ""


class _Layout:
    """Index bookkeeping for the stacked multiplier vector z."""

    def __init__(self, h: int, n: int, active_mu: list[tuple[int, int]],
                 m_i: int, m_e: int, slack_rows: list[tuple[int, int]],
                 p_signed: bool):
        self.h, self.n, self.m_i, self.m_e = h, n, m_i, m_e
        self.active_mu = active_mu
        self.slack_rows = slack_rows
        self.lam_idx = 0
        self.p_base = 1
        self.mu_base = self.p_base + (h + 1) * n
        self.eq_base = self.mu_base + len(active_mu)
        self.size = self.eq_base + (h + 1) * m_e
        self.mu_index = {tk: self.mu_base + i for i, tk in enumerate(active_mu)}
        self.p_signed = p_signed

    def p_idx(self, t: int, a: int) -> int:
        """Index of p_{t, a} for t in 1..h+1."""
        return self.p_base + (t - 1) * self.n + a

    def eq_idx(self, t: int, j: int) -> int:
        return self.eq_base + t * self.m_e + j

    @property
    def p1_indices(self) -> list[int]:
        return [self.p_idx(1, a) for a in range(self.n)]

    @property
    def sign_indices(self) -> list[int]:
        idx = [self.lam_idx]
        if self.p_signed:
            idx.extend(range(self.p_base, self.mu_base))
        idx.extend(range(self.mu_base, self.eq_base))
        return idx

    def pack(self, z: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        h, n = self.h, self.n
        lam0 = float(z[self.lam_idx])
        p = z[self.p_base:self.mu_base].reshape(h + 1, n).copy()
        mu = np.zeros((h + 1, self.m_i))
        for (t, k), i in self.mu_index.items():
            mu[t, k] = z[i]
        eq = z[self.eq_base:].reshape(h + 1, self.m_e).copy() if self.m_e else \
            np.zeros((h + 1, 0))
        return lam0, p, mu, eq


def _build_layout(
    fh: FiniteHorizonProblem,
    candidate: Trajectory,
    variant: TheoremVariant,
    activity_tol: float,
) -> _Layout:
    problem, h = fh.problem, fh.h
    m_i, m_e = problem.controls.m_i, problem.controls.m_e

    slack_rows: list[tuple[int, int]] = []
    if problem.kind is SystemKind.INEQUATION:
        report = check_admissibility(problem, candidate, activity_tol)
        for t in range(h + 1):
            for a in range(problem.n):
                if report.slack[t, a] > activity_tol:
                    slack_rows.append((t, a))

    active_mu: list[tuple[int, int]] = []
    for t in range(h + 1):
        if m_i:
            g_vals = [row.fn(t, candidate.controls[t]) for row in problem.controls.g_rows]
            act = active_set(g_vals, activity_tol)
            active_mu.extend((t, k) for k in sorted(act.indices))
    return _Layout(h, problem.n, active_mu, m_i, m_e, slack_rows,
                   p_signed=variant.adjoint_signed)


def _check_variant_preconditions(
    derivs: Sequence[StageDerivatives], variant: TheoremVariant, h: int
) -> None:
    for t in range(1, h + 1):
        inv = invertibility_check(derivs[t].D1f)
        mono = monotonicity_check(derivs[t].D1f)
        monotone = mono.pos_diag and mono.nonneg_offdiag
        if variant in (TheoremVariant.THM31, TheoremVariant.THM48) and not inv.invertible:
            raise ValueError(f"{variant.value} needs invertible D1f; fails at t={t} "
                             f"(condition {inv.condition_estimate:.2e})")
        if variant is TheoremVariant.THM32 and not monotone:
            raise ValueError(f"{variant.value} needs the monotone sign pattern; fails at t={t}")
        if variant in (TheoremVariant.THM43, TheoremVariant.THM47) \
                and not (inv.invertible or monotone):
            raise ValueError(f"{variant.value} needs invertibility or monotonicity; "
                             f"both fail at t={t}")


def _nullspace(M: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Nullspace basis (columns), best fallback direction, and ||M||_2."""
    if M.shape[0] == 0:
        return np.eye(size), np.zeros(size), 0.0
    U, s, Vt = np.linalg.svd(M)
    norm = float(s[0]) if s.size else 0.0
    rank_tol = max(M.shape) * np.finfo(float).eps * max(norm, 1.0)
    ns = Vt[np.sum(s > rank_tol):].T
    nfull = Vt.shape[0]
    if ns.shape[1] == 0 and nfull > M.shape[0]:
        ns = Vt[M.shape[0]:].T  # rectangular with more columns than rows
    fallback = Vt[-1] if Vt.size else np.zeros(size)
    return ns, fallback, norm


def _tie_break_lp(N: np.ndarray, layout: _Layout, objective_idx: int,
                  sense: float) -> Optional[np.ndarray]:
    """Maximize sense * z[objective_idx] over z = N c, sign rows >= 0,
    |lambda0| + ||p_1||_1 <= 1 (linearized with auxiliaries for free-signed
    coordinates).  Returns z or None."""
    r = N.shape[1]
    free_aux = [layout.lam_idx] + layout.p1_indices if not layout.p_signed \
        else []
    if layout.p_signed:
        # lambda0 and p_1 are sign-constrained: the sphere surrogate is linear
        norm_row = N[layout.lam_idx] + N[layout.p1_indices].sum(axis=0)
        A_ub = [-N[i] for i in layout.sign_indices] + [norm_row]
        b_ub = [0.0] * len(layout.sign_indices) + [1.0]
        c = -sense * N[objective_idx]
        res = linprog(np.concatenate([c]), A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                      bounds=[(None, None)] * r, method="highs")
        if res.status != 0:
            return None
        return N @ res.x
    # free-signed p_1 (THM48): auxiliaries a_j >= |p_1j|, lambda0 >= 0
    naux = len(layout.p1_indices)
    A_rows, b_vals = [], []
    for i in layout.sign_indices:
        A_rows.append(np.concatenate([-N[i], np.zeros(naux)]))
        b_vals.append(0.0)
    for j, i in enumerate(layout.p1_indices):
        e = np.zeros(naux)
        e[j] = -1.0
        A_rows.append(np.concatenate([N[i], e]))
        b_vals.append(0.0)
        A_rows.append(np.concatenate([-N[i], e]))
        b_vals.append(0.0)
    A_rows.append(np.concatenate([N[layout.lam_idx], np.ones(naux)]))
    b_vals.append(1.0)
    c = np.concatenate([-sense * N[objective_idx], np.zeros(naux)])
    res = linprog(c, A_ub=np.array(A_rows), b_ub=np.array(b_vals),
                  bounds=[(None, None)] * r + [(0, None)] * naux, method="highs")
    if res.status != 0:
        return None
    return N @ res.x[:r]


def _canonicalize(
    M: np.ndarray,
    layout: _Layout,
    clip_tol: float = 1e-8,
) -> tuple[Optional[np.ndarray], float, float, str]:
    """Pick the sign-feasible normalized direction in (near-)null(M).

    Returns (z or None, best_residual, system_norm, message).  Ties in a
    multi-dimensional nullspace are broken by maximizing lambda0 (preferring
    normal multipliers); abnormal directions are tried next.
    """
    ns, fallback, norm = _nullspace(M, layout.size)

    def finish(z: np.ndarray) -> Optional[tuple[np.ndarray, float]]:
        z = z.copy()
        sign_idx = layout.sign_indices
        scale = float(np.max(np.abs(z), initial=0.0))
        if scale <= 0:
            return None
        if np.any(z[sign_idx] < -clip_tol * scale):
            return None
        z[sign_idx] = np.maximum(z[sign_idx], 0.0)
        denom = abs(z[layout.lam_idx]) + float(np.linalg.norm(z[layout.p1_indices]))
        if denom <= clip_tol * scale:
            return None  # nontriviality of (lambda0, p_1) unattainable
        z = z / denom
        resid = float(np.linalg.norm(M @ z)) if M.shape[0] else 0.0
        return z, resid

    candidates: list[np.ndarray] = []
    if ns.shape[1] == 1:
        v = ns[:, 0]
        order = [v, -v] if v[layout.lam_idx] >= 0 else [-v, v]
        candidates.extend(order)
    elif ns.shape[1] > 1:
        z = _tie_break_lp(ns, layout, layout.lam_idx, +1.0)
        if z is not None and z[layout.lam_idx] > 1e-9:
            candidates.append(z)
        else:
            for i in layout.p1_indices:
                senses = (+1.0,) if layout.p_signed else (+1.0, -1.0)
                for sense in senses:
                    z = _tie_break_lp(ns, layout, i, sense)
                    if z is not None and abs(z[i]) > 1e-9:
                        candidates.append(z)
                        break
                if candidates:
                    break
    if not candidates:
        v = fallback
        candidates = [v, -v] if v[layout.lam_idx] >= 0 else [-v, v]

    best: Optional[tuple[np.ndarray, float]] = None
    for cand in candidates:
        out = finish(cand)
        if out is not None and (best is None or out[1] < best[1]):
            best = out
    if best is None:
        return None, float("inf"), norm, "no sign-feasible normalized direction"
    z, resid = best
    return z, resid, norm, ""


def _pack_result(
    fh: FiniteHorizonProblem,
    layout: _Layout,
    variant: TheoremVariant,
    z: Optional[np.ndarray],
    resid: float,
    norm: float,
    message: str,
    extra: Optional[dict] = None,
) -> TruncatedMultipliers:
    threshold = RESIDUAL_THRESHOLD_FACTOR * (1.0 + norm)
    residuals = {"max": resid, "threshold": threshold, "system_norm": norm}
    if extra:
        residuals.update(extra)
    if z is None:
        return TruncatedMultipliers(
            h=fh.h, lambda0=0.0,
            p=np.zeros((fh.h + 1, fh.problem.n)),
            mu=np.zeros((fh.h + 1, fh.problem.controls.m_i)),
            eq_lambda=np.zeros((fh.h + 1, fh.problem.controls.m_e)),
            residuals=residuals, accepted=False, variant=variant,
            message=message or f"no certificate at horizon {fh.h}")
    lam0, p, mu, eq = layout.pack(z)
    accepted = resid <= threshold
    if not accepted and not message:
        message = (f"no certificate at horizon {fh.h}: best residual {resid:.3e} "
                   f"exceeds threshold {threshold:.3e}")
    return TruncatedMultipliers(
        h=fh.h, lambda0=lam0, p=p, mu=mu, eq_lambda=eq,
        residuals=residuals, accepted=accepted, variant=variant, message=message)


def solve_multipliers(
    fh: FiniteHorizonProblem,
    candidate: Trajectory,
    derivs: Sequence[StageDerivatives],
    variant: Optional[TheoremVariant] = None,
    activity_tol: float = DEFAULT_ACTIVITY_TOL,
) -> TruncatedMultipliers:
    """Solve the truncated problem's multiplier system on the normalization sphere.

    Complementary slackness is enforced first (slack dynamic rows zero their
    adjoint component, inactive inequality rows drop their multiplier); the
    adjoint and weak-maximum equations are then stacked into one homogeneous
    system in (lambda0, p_1..p_{h+1}, active mu, equality lambda).
    """
    problem, h = fh.problem, fh.h
    if variant is None:
        variant = default_variant(problem)
    _check_variant_preconditions(derivs, variant, h)
    layout = _build_layout(fh, candidate, variant, activity_tol)
    n, d = problem.n, problem.d

    rows: list[np.ndarray] = []
    row_tags: list[tuple] = []
    # adjoint equations, t = 1..h: p_t - p_{t+1} D1f_t - lambda0 D1phi_t = 0
    for t in range(1, h + 1):
        dv = derivs[t]
        for b in range(n):
            row = np.zeros(layout.size)
            row[layout.p_idx(t, b)] = 1.0
            for a in range(n):
                row[layout.p_idx(t + 1, a)] -= dv.D1f[a, b]
            row[layout.lam_idx] = -dv.D1phi[b]
            rows.append(row)
            row_tags.append(("AE", t, b))
    # weak-maximum equations, t = 0..h
    for t in range(h + 1):
        dv = derivs[t]
        for c in range(d):
            row = np.zeros(layout.size)
            for a in range(n):
                row[layout.p_idx(t + 1, a)] = dv.D2f[a, c]
            row[layout.lam_idx] = dv.D2phi[c]
            for j in range(layout.m_e):
                row[layout.eq_idx(t, j)] = dv.De[j, c]
            for k in range(layout.m_i):
                if (t, k) in layout.mu_index:
                    row[layout.mu_index[(t, k)]] = dv.Dg[k, c]
            rows.append(row)
            row_tags.append(("WM", t, c))
    # slackness: zero the adjoint on slack dynamic rows
    for (t, a) in layout.slack_rows:
        row = np.zeros(layout.size)
        row[layout.p_idx(t + 1, a)] = 1.0
        rows.append(row)
        row_tags.append(("slack", t, a))

    M = np.array(rows) if rows else np.zeros((0, layout.size))
    z, resid, norm, message = _canonicalize(M, layout)
    extra = {}
    if z is not None and M.shape[0]:
        defects = np.abs(M @ z)
        extra = {
            "AE": np.array([d_ for d_, tag in zip(defects, row_tags) if tag[0] == "AE"]),
            "WM": np.array([d_ for d_, tag in zip(defects, row_tags) if tag[0] == "WM"]),
            "slack": np.array([d_ for d_, tag in zip(defects, row_tags) if tag[0] == "slack"]),
        }
    return _pack_result(fh, layout, variant, z, resid, norm, message, extra)


def oracle_kkt(
    fh: FiniteHorizonProblem,
    candidate: Trajectory,
    variant: Optional[TheoremVariant] = None,
    activity_tol: float = DEFAULT_ACTIVITY_TOL,
    fd_step: float = 1e-5,
    max_horizon: int = ORACLE_MAX_HORIZON,
) -> TruncatedMultipliers:
    """Independent multiplier oracle from the monolithic finite-horizon program.

    Differentiates the stacked objective and constraint functions of the
    reformulated program by central finite differences in the full decision
    vector (x_1..x_h, u_0..u_h) and solves the raw Lagrangian stationarity
    system, canonicalized identically to ``solve_multipliers``.
    """
    problem, h = fh.problem, fh.h
    if h > max_horizon:
        raise ValueError(f"oracle limited to h <= {max_horizon}, got {h}")
    if variant is None:
        variant = default_variant(problem)
    layout = _build_layout(fh, candidate, variant, activity_tol)
    n, d = problem.n, problem.d
    nz = h * n + (h + 1) * d

    base = np.concatenate([candidate.states[1:h + 1].reshape(-1),
                           candidate.controls[:h + 1].reshape(-1)])

    def unpack(zv: np.ndarray):
        xs = [problem.sigma] + list(zv[:h * n].reshape(h, n)) + [fh.terminal_state]
        us = list(zv[h * n:].reshape(h + 1, d))
        return xs, us

    def objective(zv: np.ndarray) -> float:
        xs, us = unpack(zv)
        return float(sum(problem.criterion(t, xs[t], us[t]) for t in range(h + 1)))

    def dyn_row(t: int, a: int):
        def fn(zv: np.ndarray) -> float:
            xs, us = unpack(zv)
            f_val = np.asarray(problem.dynamics(t, xs[t], us[t])).reshape(-1)
            return float(f_val[a] - xs[t + 1][a])
        return fn

    def control_row(t: int, row):
        def fn(zv: np.ndarray) -> float:
            _, us = unpack(zv)
            return float(row.fn(t, us[t]))
        return fn

    def grad(fn) -> np.ndarray:
        g = np.zeros(nz)
        for i in range(nz):
            e = np.zeros(nz)
            e[i] = fd_step
            g[i] = (fn(base + e) - fn(base - e)) / (2.0 * fd_step)
        return g

    # columns of the stationarity system, in reduced multiplier order
    cols: list[np.ndarray] = []
    col_idx: list[int] = []
    cols.append(grad(objective))
    col_idx.append(layout.lam_idx)
    slack_set = set(layout.slack_rows)
    for t in range(h + 1):
        for a in range(n):
            if (t, a) in slack_set:
                continue  # slack dynamic row: adjoint component pinned to zero
            cols.append(grad(dyn_row(t, a)))
            col_idx.append(layout.p_idx(t + 1, a))
    for (t, k) in layout.active_mu:
        cols.append(grad(control_row(t, problem.controls.g_rows[k])))
        col_idx.append(layout.mu_index[(t, k)])
    for t in range(h + 1):
        for j in range(layout.m_e):
            cols.append(grad(control_row(t, problem.controls.e_rows[j])))
            col_idx.append(layout.eq_idx(t, j))

    M_red = np.column_stack(cols)
    # expand to the full layout: pinned coordinates get an identity row so the
    # shared canonicalization forces them to zero
    pinned = sorted(set(range(layout.size)) - set(col_idx))
    M = np.zeros((nz + len(pinned), layout.size))
    M[:nz, col_idx] = M_red
    for i, j in enumerate(pinned):
        M[nz + i, j] = 1.0

    rank = int(np.linalg.matrix_rank(M_red))
    z, resid, norm, message = _canonicalize(M, layout)
    extra = {"stationarity_rank": rank, "stationarity_cols": M_red.shape[1]}
    return _pack_result(fh, layout, variant, z, resid, norm, message, extra)
