"""Constructive constraint-qualification certificates.

Two separation questions are decided with explicit, checkable evidence:

* is the origin outside the convex hull of a family of linear functionals?
  (yes -> a witness vector w with <phi_i, w> >= 1; no -> simplex weights
  alpha with sum alpha_i phi_i = 0), and
* is the span of an equality family disjoint from the convex hull of an
  inequality family?  (yes -> w with <psi_j, w> = 0 and <phi_k, w> >= 1;
  no -> coefficients zeta, theta with sum zeta_j psi_j = sum theta_k phi_k,
  theta on the simplex).

Both are decided by an internal two-phase dense simplex with Bland's
anti-cycling rule; the infeasible branch extracts the Farkas dual from the
final phase-1 basis.  Strict positivity is normalized to ">= 1" by
homogeneity so that feasibility is numerically decidable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

CERT_TOL = 1e-9
DEFAULT_ACTIVE_TOL = 1e-8
_PIVOT_TOL = 1e-11


class SeparationOutcome(Enum):
    SEPARATED = "separated"
    NOT_SEPARATED = "not_separated"
    DISJOINT = "disjoint"
    INTERSECTING = "intersecting"


@dataclass(frozen=True, eq=False)
class FunctionalFamily:
    """A finite family of linear functionals on R^d, stored as rows."""

    rows: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if rows.size == 0 or rows.shape[0] == 0:
            raise ValueError("family must be nonempty")
        object.__setattr__(self, "rows", rows)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(rows.shape[0])))
        elif len(self.labels) != rows.shape[0]:
            raise ValueError("labels must match row count")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True, eq=False)
class SeparationCertificate:
    """Explicit evidence for either branch of the separation alternatives.

    SEPARATED / DISJOINT carry ``witness``; NOT_SEPARATED carries simplex
    weights in ``convex_coeffs``; INTERSECTING carries ``convex_coeffs``
    (theta, on the simplex) and ``span_coeffs`` (zeta).
    """

    outcome: SeparationOutcome
    witness: Optional[np.ndarray] = None
    convex_coeffs: Optional[np.ndarray] = None
    span_coeffs: Optional[np.ndarray] = None

    def check(
        self,
        inequalities: FunctionalFamily,
        equalities: Optional[FunctionalFamily] = None,
        tol: float = CERT_TOL,
    ) -> bool:
        """Verify the certificate by direct arithmetic against the families."""
        phi = inequalities.rows
        if self.outcome is SeparationOutcome.SEPARATED:
            return bool(np.all(phi @ self.witness >= 1.0 - tol))
        if self.outcome is SeparationOutcome.NOT_SEPARATED:
            a = self.convex_coeffs
            return bool(
                np.all(a >= -tol)
                and abs(float(np.sum(a)) - 1.0) <= tol
                and float(np.linalg.norm(a @ phi)) <= tol
            )
        psi = equalities.rows
        if self.outcome is SeparationOutcome.DISJOINT:
            return bool(
                np.all(np.abs(psi @ self.witness) <= tol)
                and np.all(phi @ self.witness >= 1.0 - tol)
            )
        theta, zeta = self.convex_coeffs, self.span_coeffs
        return bool(
            np.all(theta >= -tol)
            and abs(float(np.sum(theta)) - 1.0) <= tol
            and float(np.linalg.norm(zeta @ psi - theta @ phi)) <= tol
        )


class _SimplexResult:
    __slots__ = ("feasible", "x", "farkas")

    def __init__(self, feasible: bool, x: Optional[np.ndarray], farkas: Optional[np.ndarray]):
        self.feasible = feasible
        self.x = x
        self.farkas = farkas


def _phase_one_simplex(A: np.ndarray, b: np.ndarray) -> _SimplexResult:
    """Solve 'find x >= 0 with A x = b' (b >= 0) by a phase-1 dense simplex.

    Bland's rule on both entering and leaving choices guarantees termination.
    On infeasibility the Farkas dual y = c_B B^-1 is returned: it satisfies
    yT A <= 0 componentwise and yT b > 0.
    """
    m, nvar = A.shape
    Aext = np.hstack([A, np.eye(m)])
    cost = np.concatenate([np.zeros(nvar), np.ones(m)])
    basis = list(range(nvar, nvar + m))

    for _ in range(20000):
        Bmat = Aext[:, basis]
        xB = np.linalg.solve(Bmat, b)
        y = np.linalg.solve(Bmat.T, cost[basis])
        reduced = cost - y @ Aext
        entering = -1
        for j in range(nvar + m):
            if j not in basis and reduced[j] < -_PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            obj = float(cost[basis] @ xB)
            if obj <= 1e-9:
                x = np.zeros(nvar + m)
                x[basis] = xB
                return _SimplexResult(True, x[:nvar], None)
            return _SimplexResult(False, None, y)
        direction = np.linalg.solve(Bmat, Aext[:, entering])
        leave, best = -1, np.inf
        for i in range(m):
            if direction[i] > _PIVOT_TOL:
                ratio = xB[i] / direction[i]
                if ratio < best - _PIVOT_TOL or (
                    abs(ratio - best) <= _PIVOT_TOL
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best, leave = ratio, i
        if leave < 0:
            raise RuntimeError("phase-1 simplex unbounded; should not happen")
        basis[leave] = entering
    raise RuntimeError("simplex iteration limit exceeded")


def _solve_witness_system(
    phi: np.ndarray, psi: np.ndarray
) -> _SimplexResult:
    """Find w with phi w >= 1 and psi w = 0, or a Farkas combination."""
    mi, d = phi.shape
    me = psi.shape[0]
    # variables (w+, w-, s) >= 0; rows: phi w+ - phi w- - s = 1 ; psi w+ - psi w- = 0
    A = np.zeros((mi + me, 2 * d + mi))
    A[:mi, :d] = phi
    A[:mi, d:2 * d] = -phi
    A[:mi, 2 * d:] = -np.eye(mi)
    if me:
        A[mi:, :d] = psi
        A[mi:, d:2 * d] = -psi
    b = np.concatenate([np.ones(mi), np.zeros(me)])
    return _phase_one_simplex(A, b)


def _polish_witness(w: np.ndarray, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    if psi.size:
        # project onto the null space of the equality rows
        w = w - psi.T @ np.linalg.lstsq(psi @ psi.T, psi @ w, rcond=None)[0]
    lo = float(np.min(phi @ w))
    if lo <= 0:
        raise RuntimeError("simplex returned an invalid witness; numerical failure")
    return w / lo


def _polish_combination(
    y: np.ndarray, phi: np.ndarray, psi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Refine raw Farkas coefficients into (theta on simplex, zeta) by least squares."""
    mi = phi.shape[0]
    y_ineq = np.maximum(y[:mi], 0.0)
    y_eq = y[mi:]
    total = float(np.sum(y_ineq))
    theta = y_ineq / total
    zeta = -y_eq / total
    support = theta > 1e-12
    # least-squares refit on the support: [phi_S^T, -psi^T] [theta_S; zeta] = 0, sum theta_S = 1
    cols = np.hstack([phi[support].T, -psi.T]) if psi.size else phi[support].T
    lhs = np.vstack([cols, np.concatenate([np.ones(int(np.sum(support))), np.zeros(psi.shape[0])])])
    rhs = np.concatenate([np.zeros(phi.shape[1]), [1.0]])
    sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    theta_s = sol[: int(np.sum(support))]
    zeta_s = sol[int(np.sum(support)):]
    if np.all(theta_s >= -1e-12):
        refined = np.zeros(mi)
        refined[support] = np.clip(theta_s, 0.0, None)
        refined /= np.sum(refined)
        resid = refined @ phi - (zeta_s @ psi if psi.size else 0.0)
        raw_resid = theta @ phi - (zeta @ psi if psi.size else 0.0)
        if np.linalg.norm(resid) <= np.linalg.norm(raw_resid):
            return refined, zeta_s
    return theta, zeta


def separation_check(family: FunctionalFamily) -> SeparationCertificate:
    """Decide whether 0 lies outside the convex hull of the family.

    Returns a witness w with <phi_i, w> >= 1 for all i, or simplex weights
    alpha with sum alpha_i phi_i = 0.  A family of all-zero rows is the
    documented degenerate case: 0 is in the hull with uniform weights.
    """
    phi = family.rows
    if np.all(np.abs(phi) <= 0.0):
        alpha = np.full(len(family), 1.0 / len(family))
        return SeparationCertificate(SeparationOutcome.NOT_SEPARATED, convex_coeffs=alpha)
    res = _solve_witness_system(phi, np.zeros((0, family.dim)))
    if res.feasible:
        w = res.x[: family.dim] - res.x[family.dim: 2 * family.dim]
        w = _polish_witness(w, phi, np.zeros((0, family.dim)))
        return SeparationCertificate(SeparationOutcome.SEPARATED, witness=w)
    theta, _ = _polish_combination(res.farkas, phi, np.zeros((0, family.dim)))
    return SeparationCertificate(SeparationOutcome.NOT_SEPARATED, convex_coeffs=theta)


def span_co_disjoint_check(
    equalities: FunctionalFamily, inequalities: FunctionalFamily
) -> SeparationCertificate:
    """Decide span{psi_j} cap co{phi_k} = empty, with evidence either way."""
    if equalities.dim != inequalities.dim:
        raise ValueError(
            f"dimension mismatch: equalities in R^{equalities.dim}, "
            f"inequalities in R^{inequalities.dim}")
    phi, psi = inequalities.rows, equalities.rows
    res = _solve_witness_system(phi, psi)
    if res.feasible:
        d = inequalities.dim
        w = _polish_witness(res.x[:d] - res.x[d: 2 * d], phi, psi)
        return SeparationCertificate(SeparationOutcome.DISJOINT, witness=w)
    theta, zeta = _polish_combination(res.farkas, phi, psi)
    return SeparationCertificate(
        SeparationOutcome.INTERSECTING, convex_coeffs=theta, span_coeffs=zeta)


@dataclass(frozen=True)
class VanishingReport:
    holds: bool
    vacuous: bool
    kappa: float
    combination_norm: float
    max_mu: float


def verify_vanishing_implication(
    equalities: FunctionalFamily,
    inequalities: FunctionalFamily,
    lambda_coeffs: Sequence[float],
    mu_coeffs: Sequence[float],
    tol: float = CERT_TOL,
) -> VanishingReport:
    """Check the multiplier-vanishing implication under span/hull disjointness.

    When the combination sum(lambda psi) + sum(mu phi) vanishes (norm <= tol),
    every mu_k must be below tol * kappa, where kappa = ||w|| for the
    disjointness witness w (pairing the combination with w bounds sum(mu)).
    A non-vanishing combination leaves the implication vacuously true.
    """
    cert = span_co_disjoint_check(equalities, inequalities)
    if cert.outcome is not SeparationOutcome.DISJOINT:
        raise ValueError("vanishing implication requires a Disjoint certificate")
    lam = np.asarray(lambda_coeffs, dtype=float)
    mu = np.asarray(mu_coeffs, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mu coefficients must be nonnegative")
    combo = lam @ equalities.rows + mu @ inequalities.rows
    norm = float(np.linalg.norm(combo))
    kappa = float(np.linalg.norm(cert.witness))
    max_mu = float(np.max(mu, initial=0.0))
    if norm > tol:
        return VanishingReport(True, True, kappa, norm, max_mu)
    return VanishingReport(max_mu <= tol * max(kappa, 1.0), False, kappa, norm, max_mu)


@dataclass(frozen=True)
class ActiveSet:
    indices: frozenset[int]
    tolerance: float


def active_set(g_values: Sequence[float], tol: float = DEFAULT_ACTIVE_TOL) -> ActiveSet:
    """Indices (0-based) of inequality constraints active at the candidate control.

    Values below -tol mean the control is inadmissible and raise.
    """
    vals = np.asarray(g_values, dtype=float)
    bad = np.flatnonzero(vals < -tol)
    if bad.size:
        raise ValueError(
            f"constraint values {vals[bad].tolist()} at indices {bad.tolist()} "
            f"violate feasibility beyond tol={tol:g}")
    return ActiveSet(indices=frozenset(int(k) for k in np.flatnonzero(np.abs(vals) <= tol)),
                     tolerance=tol)
