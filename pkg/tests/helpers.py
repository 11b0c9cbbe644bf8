"""Independent oracles shared by the test modules.

These deliberately avoid the library's own machinery: hull membership is
decided by brute-force enumeration of Caratheodory-sized subsets, span/hull
disjointness by explicit projection onto the orthogonal complement, and
criterion sums by compensated summation (math.fsum).
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np


def hull_contains_zero(rows: np.ndarray, tol: float = 1e-9) -> bool:
    """Brute-force test whether 0 is a convex combination of the rows.

    If 0 is in the hull, some basic feasible combination is supported on an
    affinely independent subset of at most dim+1 points, where the convex
    coefficients solve a square-rank linear system uniquely; enumerating all
    subsets of that size therefore decides membership exactly.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    m, dim = rows.shape
    max_support = min(m, dim + 1)
    for size in range(1, max_support + 1):
        for subset in combinations(range(m), size):
            a_mat = np.vstack([rows[list(subset)].T, np.ones((1, size))])
            b = np.zeros(dim + 1)
            b[-1] = 1.0
            alpha, *_ = np.linalg.lstsq(a_mat, b, rcond=None)
            if np.all(alpha >= -tol) and np.linalg.norm(a_mat @ alpha - b) <= tol:
                return True
    return False


def span_hull_intersect(eq_rows: np.ndarray, ineq_rows: np.ndarray,
                        tol: float = 1e-9) -> bool:
    """Brute-force test whether span(eq_rows) meets co(ineq_rows).

    A convex combination lies in the span iff its projection onto the
    orthogonal complement of the span vanishes, so the question reduces to
    hull membership of the projected rows.
    """
    eq_rows = np.atleast_2d(np.asarray(eq_rows, dtype=float))
    ineq_rows = np.atleast_2d(np.asarray(ineq_rows, dtype=float))
    if eq_rows.size == 0:
        return hull_contains_zero(ineq_rows, tol)
    # orthonormal basis of span(eq_rows) via SVD
    u, s, vt = np.linalg.svd(eq_rows, full_matrices=False)
    rank = int(np.sum(s > max(s[0], 1.0) * 1e-12)) if s.size else 0
    basis = vt[:rank]
    projected = ineq_rows - (ineq_rows @ basis.T) @ basis
    return hull_contains_zero(projected, tol)


def fsum_partial_sums(problem, traj, h_list) -> np.ndarray:
    """Criterion partial sums by compensated summation, one value per horizon."""
    out = []
    for h in h_list:
        out.append(math.fsum(
            float(problem.criterion(t, traj.states[t], traj.controls[t]))
            for t in range(h + 1)))
    return np.array(out)


def multiplier_gap(a, b) -> float:
    """Largest componentwise gap between two TruncatedMultipliers."""
    return max(
        abs(a.lambda0 - b.lambda0),
        float(np.max(np.abs(a.p - b.p), initial=0.0)),
        float(np.max(np.abs(a.mu - b.mu), initial=0.0)),
        float(np.max(np.abs(a.eq_lambda - b.eq_lambda), initial=0.0)),
    )
