"""Built-in desk-scale problems and their candidate trajectories.

Every catalog entry belongs to the affine-quadratic class

    f_t(x, u) = A x + B u + c,        phi_t(x, u) = -beta^t (x'Qx + u'Ru),

which is rich enough to exercise every theorem variant while keeping each
multiplier solvable by hand.  Candidates for the unconstrained entries come
from the discounted Riccati fixed point (the stationary linear-quadratic
feedback); constrained entries pin the offending controls at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from horizon_pmp.model import (
    ConstraintRow,
    ControlSetSpec,
    ControlVariant,
    ProblemSpec,
    SystemKind,
    Trajectory,
    interior_controls,
)

DEFAULT_CATALOG_H_MAX = 100


@dataclass(frozen=True)
class AffineQuadraticData:
    """Stage-constant data of an affine-quadratic problem.

    Control constraints are affine rows G u + g0 >= 0 and E u + e0 = 0; the
    control-set variant is derived from which blocks are present.
    """

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    beta: float
    sigma: np.ndarray
    kind: SystemKind
    G: Optional[np.ndarray] = None
    g0: Optional[np.ndarray] = None
    E: Optional[np.ndarray] = None
    e0: Optional[np.ndarray] = None
    H_max: int = DEFAULT_CATALOG_H_MAX
    name: str = ""

    def __post_init__(self):
        for attr in ("A", "B", "c", "Q", "R", "sigma"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=float))
        n = self.A.shape[0]
        d = self.B.shape[1] if self.B.ndim == 2 else 1
        object.__setattr__(self, "A", self.A.reshape(n, n))
        object.__setattr__(self, "B", self.B.reshape(n, d))
        object.__setattr__(self, "c", self.c.reshape(n))
        object.__setattr__(self, "Q", self.Q.reshape(n, n))
        object.__setattr__(self, "R", self.R.reshape(d, d))
        object.__setattr__(self, "sigma", self.sigma.reshape(n))
        if (self.G is None) != (self.g0 is None) or (self.E is None) != (self.e0 is None):
            raise ValueError("constraint matrix and offset must come together")
        if self.G is not None:
            G = np.asarray(self.G, dtype=float).reshape(-1, d)
            object.__setattr__(self, "G", G)
            object.__setattr__(self, "g0", np.asarray(self.g0, dtype=float).reshape(G.shape[0]))
        if self.E is not None:
            E = np.asarray(self.E, dtype=float).reshape(-1, d)
            object.__setattr__(self, "E", E)
            object.__setattr__(self, "e0", np.asarray(self.e0, dtype=float).reshape(E.shape[0]))
        if self.E is not None and self.G is None:
            raise ValueError("equality control rows require at least one inequality row")
        if self.beta <= 0:
            raise ValueError("discount beta must be positive")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.B.shape[1]

    def control_set(self) -> ControlSetSpec:
        if self.G is None:
            return interior_controls()

        def ineq_row(k: int) -> ConstraintRow:
            gk, ok = self.G[k].copy(), float(self.g0[k])
            return ConstraintRow(fn=lambda t, u: float(gk @ u + ok),
                                 grad=lambda t, u: gk,
                                 label=f"g[{k}]")

        g_rows = tuple(ineq_row(k) for k in range(self.G.shape[0]))
        if self.E is None:
            return ControlSetSpec(variant=ControlVariant.INEQUALITIES, g_rows=g_rows)

        def eq_row(j: int) -> ConstraintRow:
            ej, oj = self.E[j].copy(), float(self.e0[j])
            return ConstraintRow(fn=lambda t, u: float(ej @ u + oj),
                                 grad=lambda t, u: ej,
                                 label=f"e[{j}]")

        e_rows = tuple(eq_row(j) for j in range(self.E.shape[0]))
        return ControlSetSpec(variant=ControlVariant.MIXED, g_rows=g_rows, e_rows=e_rows)


def affine_quadratic_problem(data: AffineQuadraticData) -> ProblemSpec:
    """ProblemSpec for the affine-quadratic class with analytic derivatives."""
    A, B, c, Q, R, beta = data.A, data.B, data.c, data.Q, data.R, data.beta

    def dynamics(t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return A @ x + B @ u + c

    def criterion(t: int, x: np.ndarray, u: np.ndarray) -> float:
        return -(beta ** t) * float(x @ Q @ x + u @ R @ u)

    return ProblemSpec(
        n=data.n, d=data.d, sigma=data.sigma, kind=data.kind,
        controls=data.control_set(), dynamics=dynamics, criterion=criterion,
        H_max=data.H_max,
        dynamics_dx=lambda t, x, u: A,
        dynamics_du=lambda t, x, u: B,
        criterion_dx=lambda t, x, u: -2.0 * (beta ** t) * (Q @ x),
        criterion_du=lambda t, x, u: -2.0 * (beta ** t) * (R @ u),
        name=data.name,
    )


def riccati_fixed_point(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    beta: float = 1.0,
    tol: float = 0.0,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Stationary discounted Riccati solution (P, K) by fixed-point iteration.

    P solves P = Q + beta A'PA - beta^2 A'PB (R + beta B'PB)^{-1} B'PA and
    K = (R + beta B'PB)^{-1} beta B'PA is the optimal feedback u = -Kx for
    minimizing sum beta^t (x'Qx + u'Ru).  Iterates until the update is below
    tol (default: exact stationarity in floating point).
    """
    A, B = np.atleast_2d(np.asarray(A, float)), np.atleast_2d(np.asarray(B, float))
    Q, R = np.atleast_2d(np.asarray(Q, float)), np.atleast_2d(np.asarray(R, float))
    P = Q.copy()
    for _ in range(max_iter):
        gain = np.linalg.solve(R + beta * B.T @ P @ B, beta * B.T @ P @ A)
        P_next = Q + beta * A.T @ P @ (A - B @ gain)
        P_next = 0.5 * (P_next + P_next.T)
        if np.max(np.abs(P_next - P)) <= tol:
            P = P_next
            break
        P = P_next
    K = np.linalg.solve(R + beta * B.T @ P @ B, beta * B.T @ P @ A)
    return P, K


def _rollout(data: AffineQuadraticData, control_law, stages: int) -> Trajectory:
    xs = [data.sigma.copy()]
    us = []
    for t in range(stages):
        u = np.asarray(control_law(t, xs[-1]), dtype=float).reshape(data.d)
        us.append(u)
        xs.append(data.A @ xs[-1] + data.B @ u + data.c)
    return Trajectory(states=np.array(xs), controls=np.array(us))


# --- catalog entries -------------------------------------------------------

def _lq1_data() -> AffineQuadraticData:
    # sigma = -1 rather than +1: with the convention p_{t+1} = -lambda0 D2phi
    # along the optimum, a negative start makes the adjoint sequence positive,
    # so the interior-variant sign conditions are satisfiable.  The problem is
    # mirror-symmetric in sigma; every other quantity is unchanged.
    return AffineQuadraticData(
        A=np.array([[0.5]]), B=np.array([[1.0]]), c=np.zeros(1),
        Q=np.eye(1), R=np.eye(1), beta=1.0, sigma=np.array([-1.0]),
        kind=SystemKind.EQUATION, name="LQ1")


def _slack1_data() -> AffineQuadraticData:
    # f(x,u) = x + 1, phi = -beta^t u^2: Q = 0 removes the state cost.
    return AffineQuadraticData(
        A=np.array([[1.0]]), B=np.zeros((1, 1)), c=np.ones(1),
        Q=np.zeros((1, 1)), R=np.eye(1), beta=0.5, sigma=np.zeros(1),
        kind=SystemKind.INEQUATION, name="SLACK1")


def _con1_data() -> AffineQuadraticData:
    # LQ1 data, positive start, and the control floor u >= 0; the unconstrained
    # feedback wants u < 0, so the floor is active at every stage.
    return AffineQuadraticData(
        A=np.array([[0.5]]), B=np.array([[1.0]]), c=np.zeros(1),
        Q=np.eye(1), R=np.eye(1), beta=1.0, sigma=np.array([1.0]),
        kind=SystemKind.EQUATION,
        G=np.array([[1.0]]), g0=np.zeros(1),
        name="CON1")


def _mix1_data() -> AffineQuadraticData:
    # two controls feeding one state: u1 pinned by an equality, u2 floored.
    return AffineQuadraticData(
        A=np.array([[0.5]]), B=np.array([[1.0, 1.0]]), c=np.zeros(1),
        Q=np.eye(1), R=np.eye(2), beta=1.0, sigma=np.array([1.0]),
        kind=SystemKind.EQUATION,
        G=np.array([[0.0, 1.0]]), g0=np.zeros(1),
        E=np.array([[1.0, 0.0]]), e0=np.zeros(1),
        name="MIX1")


_DATA_BUILDERS = {
    "LQ1": _lq1_data,
    "SLACK1": _slack1_data,
    "CON1": _con1_data,
    "MIX1": _mix1_data,
}

CATALOG_NAMES = tuple(_DATA_BUILDERS)


def catalog_data(name: str) -> AffineQuadraticData:
    try:
        return _DATA_BUILDERS[name.upper()]()
    except KeyError:
        raise KeyError(f"unknown catalog problem {name!r}; "
                       f"choices: {', '.join(CATALOG_NAMES)}") from None


def catalog_problem(name: str) -> ProblemSpec:
    return affine_quadratic_problem(catalog_data(name))


def catalog_candidate(name: str, stages: Optional[int] = None) -> Trajectory:
    """The documented candidate trajectory for a catalog problem.

    LQ1 follows the stationary Riccati feedback u = -Kx; SLACK1 rests at the
    origin (every dynamic inequality strictly slack); CON1 and MIX1 pin their
    sign-constrained controls at the active boundary, which is where the
    unconstrained feedback would leave the admissible control set.
    """
    data = catalog_data(name)
    if stages is None:
        stages = data.H_max - 1
    if stages < 1 or stages > data.H_max - 1:
        raise ValueError(f"stages must lie in 1..{data.H_max - 1}")
    key = name.upper()
    if key == "LQ1":
        _, K = riccati_fixed_point(data.A, data.B, data.Q, data.R, data.beta)
        return _rollout(data, lambda t, x: -K @ x, stages)
    if key == "SLACK1":
        zero = np.zeros(data.d)
        states = np.zeros((stages + 1, data.n))
        controls = np.tile(zero, (stages, 1))
        return Trajectory(states=states, controls=controls)
    # CON1 / MIX1: boundary controls, free decay of the state
    return _rollout(data, lambda t, x: np.zeros(data.d), stages)
