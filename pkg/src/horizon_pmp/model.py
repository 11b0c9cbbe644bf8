"""Problem model: infinite-horizon problems at desk scale.

An infinite-horizon problem is materialized up to a working horizon
``H_max``.  The dynamics may act as a componentwise inequation
(``x_{t+1} <= f_t(x_t, u_t)``) or as an equation.  Control sets are either
open (interior candidates), cut out by scalar inequalities ``g_t^k(u) >= 0``,
or mixed with additional equalities ``e_t^j(u) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_FEASIBILITY_TOL = 1e-9


class SystemKind(Enum):
    INEQUATION = "inequation"
    EQUATION = "equation"


class ControlVariant(Enum):
    INTERIOR = "interior"
    INEQUALITIES = "inequalities"
    MIXED = "mixed"


class DimensionMismatchError(ValueError):
    """Trajectory or constraint data does not match the problem dimensions."""


class InadmissibleTrajectoryError(ValueError):
    """An operation required an admissible trajectory and got a report saying otherwise."""

    def __init__(self, message: str, report: "AdmissibilityReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ConstraintRow:
    """One scalar control constraint, evaluated per stage.

    ``fn(t, u)`` returns the constraint value; ``grad(t, u)``, when supplied,
    returns the exact gradient row in R^d and overrides finite differences.
    """

    fn: Callable[[int, np.ndarray], float]
    grad: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    label: str = ""


@dataclass(frozen=True)
class ControlSetSpec:
    variant: ControlVariant
    g_rows: tuple[ConstraintRow, ...] = ()
    e_rows: tuple[ConstraintRow, ...] = ()

    def __post_init__(self):
        if self.variant is ControlVariant.INTERIOR:
            if self.g_rows or self.e_rows:
                raise ValueError("interior control set carries no constraint rows")
        elif self.variant is ControlVariant.INEQUALITIES:
            if not self.g_rows or self.e_rows:
                raise ValueError("inequality control set needs m >= 1 g-rows and no e-rows")
        else:
            if not self.g_rows or not self.e_rows:
                raise ValueError("mixed control set needs m_i >= 1 g-rows and m_e >= 1 e-rows")

    @property
    def m_i(self) -> int:
        return len(self.g_rows)

    @property
    def m_e(self) -> int:
        return len(self.e_rows)


def interior_controls() -> ControlSetSpec:
    return ControlSetSpec(ControlVariant.INTERIOR)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Stage data for all t up to the working horizon.

    ``dynamics(t, x, u)`` maps to R^n, ``criterion(t, x, u)`` to R.  The
    optional ``*_dx`` / ``*_du`` callables supply exact partial differentials
    and take precedence over numeric differentiation everywhere.
    """

    n: int
    d: int
    sigma: np.ndarray
    kind: SystemKind
    controls: ControlSetSpec
    dynamics: Callable[[int, np.ndarray, np.ndarray], np.ndarray]
    criterion: Callable[[int, np.ndarray, np.ndarray], float]
    H_max: int
    dynamics_dx: Optional[Callable[[int, np.ndarray, np.ndarray], np.ndarray]] = None
    dynamics_du: Optional[Callable[[int, np.ndarray, np.ndarray], np.ndarray]] = None
    criterion_dx: Optional[Callable[[int, np.ndarray, np.ndarray], np.ndarray]] = None
    criterion_du: Optional[Callable[[int, np.ndarray, np.ndarray], np.ndarray]] = None
    state_set: Optional[Callable[[int, np.ndarray], bool]] = None
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("state and control dimensions must be >= 1")
        if self.H_max < 2:
            raise ValueError("working horizon H_max must be >= 2")
        sigma = np.asarray(self.sigma, dtype=float).reshape(-1)
        if sigma.shape != (self.n,):
            raise DimensionMismatchError(
                f"initial state has shape {sigma.shape}, expected ({self.n},)")
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Candidate state/control sequences; states length = controls length + 1."""

    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        controls = np.atleast_2d(np.asarray(self.controls, dtype=float))
        if len(states) != len(controls) + 1:
            raise DimensionMismatchError(
                f"states length {len(states)} must be controls length {len(controls)} + 1")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "controls", controls)

    @property
    def horizon(self) -> int:
        """Largest stage index t with both x_t and u_t materialized."""
        return len(self.controls) - 1


@dataclass(frozen=True)
class AdmissibilityReport:
    feasible: bool
    violations: tuple[tuple, ...]
    slack: np.ndarray  # shape (T, n): f_t^a(x_t,u_t) - x_{t+1}^a
    tol: float

    def __str__(self) -> str:
        if self.feasible:
            return f"admissible (tol={self.tol:g}, {self.slack.shape[0]} stages checked)"
        lines = [f"inadmissible (tol={self.tol:g}):"]
        for v in self.violations[:20]:
            lines.append(f"  t={v[0]} {v[2]} [{v[1]}] magnitude {v[3]:.3e}")
        if len(self.violations) > 20:
            lines.append(f"  ... {len(self.violations) - 20} more")
        return "\n".join(lines)


def _check_shapes(problem: ProblemSpec, traj: Trajectory) -> None:
    if traj.states.shape[1] != problem.n:
        raise DimensionMismatchError(
            f"state dimension {traj.states.shape[1]} != problem n={problem.n}")
    if traj.controls.shape[1] != problem.d:
        raise DimensionMismatchError(
            f"control dimension {traj.controls.shape[1]} != problem d={problem.d}")
    if traj.horizon + 1 > problem.H_max + 1:
        raise DimensionMismatchError(
            f"trajectory materialized past H_max={problem.H_max} at stage {traj.horizon}")


def check_admissibility(
    problem: ProblemSpec,
    traj: Trajectory,
    tol: float = DEFAULT_FEASIBILITY_TOL,
) -> AdmissibilityReport:
    """Check x_0 = sigma, the dynamic rows, and the control-set constraints.

    Slack values f_t^a(x_t,u_t) - x_{t+1}^a are recorded for every (t, a)
    regardless of feasibility.
    """
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    _check_shapes(problem, traj)
    violations: list[tuple] = []
    T = len(traj.controls)
    slack = np.zeros((T, problem.n))

    init_gap = np.abs(traj.states[0] - problem.sigma)
    for a in np.flatnonzero(init_gap > tol):
        violations.append((0, int(a), "initial-state", float(init_gap[a])))

    for t in range(T):
        x_t, u_t, x_next = traj.states[t], traj.controls[t], traj.states[t + 1]
        f_val = np.asarray(problem.dynamics(t, x_t, u_t), dtype=float).reshape(-1)
        if f_val.shape != (problem.n,):
            raise DimensionMismatchError(
                f"dynamics at stage {t} returned shape {f_val.shape}, expected ({problem.n},)")
        slack[t] = f_val - x_next
        if problem.kind is SystemKind.EQUATION:
            for a in np.flatnonzero(np.abs(slack[t]) > tol):
                violations.append((t, int(a), "dynamics-equation", float(abs(slack[t][a]))))
        else:
            for a in np.flatnonzero(slack[t] < -tol):
                violations.append((t, int(a), "dynamics-inequation", float(-slack[t][a])))
        for k, row in enumerate(problem.controls.g_rows):
            val = float(row.fn(t, u_t))
            if val < -tol:
                violations.append((t, k, f"g[{row.label or k}]", float(-val)))
        for j, row in enumerate(problem.controls.e_rows):
            val = float(row.fn(t, u_t))
            if abs(val) > tol:
                violations.append((t, j, f"e[{row.label or j}]", float(abs(val))))
        if problem.state_set is not None and not problem.state_set(t, x_t):
            violations.append((t, -1, "state-set", float("nan")))

    return AdmissibilityReport(
        feasible=not violations, violations=tuple(violations), slack=slack, tol=tol)


@dataclass(frozen=True)
class PartialSums:
    horizons: tuple[int, ...]
    sums: np.ndarray
    cauchy: bool


def partial_sums(
    problem: ProblemSpec,
    traj: Trajectory,
    h_list: Sequence[int],
    cauchy_tol: float = 1e-9,
) -> PartialSums:
    """Partial criterion sums over the given horizons, in ascending order.

    The Cauchy flag is set when all successive differences of the returned
    sums fall below ``cauchy_tol``.
    """
    if len(h_list) == 0:
        raise ValueError("h_list must be nonempty")
    _check_shapes(problem, traj)
    hs = sorted(int(h) for h in h_list)
    if hs[-1] > traj.horizon:
        raise ValueError(f"horizon {hs[-1]} beyond materialized horizon {traj.horizon}")
    stage = np.array([
        float(problem.criterion(t, traj.states[t], traj.controls[t]))
        for t in range(hs[-1] + 1)
    ])
    cum = np.cumsum(stage)
    sums = cum[hs]
    diffs = np.abs(np.diff(sums))
    return PartialSums(tuple(hs), sums, bool(len(diffs) == 0 or np.all(diffs <= cauchy_tol)))


@dataclass(frozen=True)
class OvertakingComparison:
    diffs: np.ndarray
    liminf_est: float
    limsup_est: float
    a_weakly_overtakes_b: bool
    a_catching_up_b: bool


def overtaking_compare(
    problem: ProblemSpec,
    a: Trajectory,
    b: Trajectory,
    h_max: int,
    tol: float = DEFAULT_FEASIBILITY_TOL,
) -> OvertakingComparison:
    """Partial-sum differences of the criterion along two admissible trajectories.

    liminf/limsup are estimated over the trailing window of the last
    ceil(h_max/4) entries.
    """
    for name, traj in (("a", a), ("b", b)):
        report = check_admissibility(problem, traj, tol)
        if not report.feasible:
            raise InadmissibleTrajectoryError(
                f"trajectory {name} is not admissible: {report}", report)
        if traj.horizon < h_max:
            raise ValueError(f"trajectory {name} not materialized to h_max={h_max}")
    sums_a = partial_sums(problem, a, range(h_max + 1)).sums
    sums_b = partial_sums(problem, b, range(h_max + 1)).sums
    diffs = sums_a - sums_b
    window = max(1, -(-(h_max) // 4))
    tail = diffs[-window:]
    liminf_est = float(np.min(tail))
    limsup_est = float(np.max(tail))
    return OvertakingComparison(
        diffs=diffs,
        liminf_est=liminf_est,
        limsup_est=limsup_est,
        a_weakly_overtakes_b=bool(liminf_est >= -tol),
        a_catching_up_b=bool(limsup_est >= -tol),
    )
