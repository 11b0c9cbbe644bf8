"""Directional derivatives and differentiability-adjacent checks.

Differentials are computed by central finite differences unless the problem
carries analytic overrides.  The module also houses the matrix checks that
gate the adjoint recursion: invertibility of the state differential and the
monotone sign pattern that yields the positive diagonal bound gamma_t.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from horizon_pmp.model import ProblemSpec, Trajectory

DEFAULT_STEP = 1e-5
DEFAULT_COND_LIMIT = 1e12


class Scheme(Enum):
    CENTRAL = "central"
    FORWARD = "forward"


class NonFiniteEvaluationError(ValueError):
    pass


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    return arr


def directional_derivative(
    fn: Callable,
    a: np.ndarray,
    v: np.ndarray,
    scheme: Scheme = Scheme.CENTRAL,
    step: float = DEFAULT_STEP,
):
    """Finite-difference estimate of the directional derivative of fn at a along v."""
    if step <= 0:
        raise ValueError("step must be positive")
    a = _as_array(a)
    v = _as_array(v)
    if scheme is Scheme.CENTRAL:
        hi = _as_array(fn(a + step * v))
        lo = _as_array(fn(a - step * v))
        out = (hi - lo) / (2.0 * step)
    else:
        hi = _as_array(fn(a + step * v))
        base = _as_array(fn(a))
        out = (hi - base) / step
    if not np.all(np.isfinite(out)):
        raise NonFiniteEvaluationError(
            f"non-finite function value near point {a!r} along {v!r}")
    return out if out.ndim else float(out)


def gateaux_matrix(
    fn: Callable,
    a: np.ndarray,
    step: float = DEFAULT_STEP,
    scheme: Scheme = Scheme.CENTRAL,
) -> np.ndarray:
    """Matrix of the linear map v -> directional derivative of fn at a.

    Column j is the derivative along the coordinate direction e_j.  Scalar
    functions produce a single row.
    """
    a = _as_array(a).reshape(-1)
    cols = []
    for j in range(a.size):
        e = np.zeros(a.size)
        e[j] = 1.0
        cols.append(np.atleast_1d(directional_derivative(fn, a, e, scheme, step)))
    return np.column_stack(cols)


@dataclass(frozen=True)
class LinearityReport:
    linear: bool
    worst_defect: float


def linearity_check(
    fn: Callable,
    a: np.ndarray,
    trials: int = 20,
    tol: float = 1e-6,
    step: float = DEFAULT_STEP,
    seed: int = 0,
) -> LinearityReport:
    """Probe linearity of v -> directional derivative: D(a, cv+w) = c D(a,v) + D(a,w).

    The defect is measured relative to 1 + the scale of the sampled values.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    a = _as_array(a).reshape(-1)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        v = rng.uniform(-1.0, 1.0, a.size)
        w = rng.uniform(-1.0, 1.0, a.size)
        c = float(rng.uniform(-2.0, 2.0))
        lhs = _as_array(directional_derivative(fn, a, c * v + w, Scheme.CENTRAL, step))
        rhs = c * _as_array(directional_derivative(fn, a, v, Scheme.CENTRAL, step)) \
            + _as_array(directional_derivative(fn, a, w, Scheme.CENTRAL, step))
        scale = 1.0 + max(np.max(np.abs(lhs), initial=0.0), np.max(np.abs(rhs), initial=0.0))
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / scale))
    return LinearityReport(linear=worst <= tol, worst_defect=worst)


@dataclass(frozen=True)
class InvertibilityReport:
    invertible: bool
    condition_estimate: float


def invertibility_check(
    D1f: np.ndarray,
    cond_limit: float = DEFAULT_COND_LIMIT,
) -> InvertibilityReport:
    D1f = np.atleast_2d(_as_array(D1f))
    if D1f.shape[0] != D1f.shape[1]:
        raise ValueError(f"matrix must be square, got {D1f.shape}")
    cond = float(np.linalg.cond(D1f))
    return InvertibilityReport(invertible=bool(np.isfinite(cond) and cond <= cond_limit),
                               condition_estimate=cond)


@dataclass(frozen=True)
class MonotonicityReport:
    nonneg_offdiag: bool
    pos_diag: bool
    gamma_t: float

    def __post_init__(self):
        assert (self.gamma_t > 0) == self.pos_diag


def monotonicity_check(D1f: np.ndarray) -> MonotonicityReport:
    """Sign pattern of the state differential: nonnegative entries, positive diagonal.

    gamma_t is the minimum diagonal entry; it is the contraction bound of the
    adjoint envelope when positive.
    """
    D1f = np.atleast_2d(_as_array(D1f))
    if D1f.shape[0] != D1f.shape[1]:
        raise ValueError(f"matrix must be square, got {D1f.shape}")
    off = D1f - np.diag(np.diag(D1f))
    gamma = float(np.min(np.diag(D1f)))
    return MonotonicityReport(
        nonneg_offdiag=bool(np.all(off >= 0.0)),
        pos_diag=bool(gamma > 0.0),
        gamma_t=gamma,
    )


@dataclass(frozen=True)
class StageDerivatives:
    """All stage differentials evaluated at (x_t, u_t).

    D1f: (n, n); D2f: (n, d); D1phi: (n,); D2phi: (d,);
    Dg: (m_i, d) rows of inequality-constraint gradients; De: (m_e, d).
    """

    D1f: np.ndarray
    D2f: np.ndarray
    D1phi: np.ndarray
    D2phi: np.ndarray
    Dg: np.ndarray
    De: np.ndarray

    def __post_init__(self):
        for name in ("D1f", "D2f", "D1phi", "D2phi", "Dg", "De"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)
        n = self.D1f.shape[0]
        d = self.D2f.shape[1]
        if self.D1f.shape != (n, n) or self.D2f.shape != (n, d):
            raise ValueError("inconsistent dynamics differential shapes")
        if self.D1phi.shape != (n,) or self.D2phi.shape != (d,):
            raise ValueError("inconsistent criterion differential shapes")
        for name in ("Dg", "De"):
            rows = getattr(self, name)
            if rows.size and rows.shape[1] != d:
                raise ValueError(f"{name} rows must live in R^{d}")


def stage_derivatives(
    problem: ProblemSpec,
    traj: Trajectory,
    t: int,
    step: float = DEFAULT_STEP,
) -> StageDerivatives:
    """Differentials of dynamics, criterion, and control constraints at stage t.

    Analytic overrides on the problem win over finite differences.
    """
    x, u = traj.states[t], traj.controls[t]
    n, d = problem.n, problem.d

    if problem.dynamics_dx is not None:
        D1f = np.asarray(problem.dynamics_dx(t, x, u), dtype=float).reshape(n, n)
    else:
        D1f = gateaux_matrix(lambda xx: problem.dynamics(t, xx, u), x, step)
    if problem.dynamics_du is not None:
        D2f = np.asarray(problem.dynamics_du(t, x, u), dtype=float).reshape(n, d)
    else:
        D2f = gateaux_matrix(lambda uu: problem.dynamics(t, x, uu), u, step)
    if problem.criterion_dx is not None:
        D1phi = np.asarray(problem.criterion_dx(t, x, u), dtype=float).reshape(n)
    else:
        D1phi = gateaux_matrix(lambda xx: problem.criterion(t, xx, u), x, step).reshape(n)
    if problem.criterion_du is not None:
        D2phi = np.asarray(problem.criterion_du(t, x, u), dtype=float).reshape(d)
    else:
        D2phi = gateaux_matrix(lambda uu: problem.criterion(t, x, uu), u, step).reshape(d)

    def row_grad(row):
        if row.grad is not None:
            return np.asarray(row.grad(t, u), dtype=float).reshape(d)
        return gateaux_matrix(lambda uu: row.fn(t, uu), u, step).reshape(d)

    Dg = np.array([row_grad(r) for r in problem.controls.g_rows]).reshape(-1, d) \
        if problem.controls.g_rows else np.zeros((0, d))
    De = np.array([row_grad(r) for r in problem.controls.e_rows]).reshape(-1, d) \
        if problem.controls.e_rows else np.zeros((0, d))
    return StageDerivatives(D1f=D1f, D2f=D2f, D1phi=D1phi, D2phi=D2phi, Dg=Dg, De=De)
