#!/usr/bin/env python3
"""Horizon sweep on the built-in LQ problem: multipliers, profile, limits.

Writes the per-horizon multiplier CSV next to a human-readable convergence
summary, then verifies the limit certificate over an extended window.

Usage: python scripts/run_lq1_sweep.py [--h 10,20,40,80] [--out lq1_sweep.csv]
"""

from __future__ import annotations

import argparse

import numpy as np

from horizon_pmp import catalog, verify
from horizon_pmp.problem_io import write_sweep_csv
from horizon_pmp.sweep import sweep


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--h", default="10,20,40,80")
    parser.add_argument("--out", default="lq1_sweep.csv")
    parser.add_argument("--window", type=int, default=20)
    args = parser.parse_args()
    h_list = [int(tok) for tok in args.h.split(",")]

    problem = catalog.catalog_problem("LQ1")
    candidate = catalog.catalog_candidate("LQ1")
    result = sweep(problem, candidate, h_list, extend_to=args.window)

    write_sweep_csv(result, args.out)
    print(f"wrote {args.out}")
    print(f"tracked window: t <= {result.window}")
    for key, vals in result.cauchy_profile.items():
        pretty = " ".join(f"{v:.3e}" for v in vals)
        print(f"cauchy profile {key:>9}: {pretty}")
    print(f"converged: {result.converged}")
    if not result.converged:
        return 1

    print(f"limit lambda0 = {result.limits.lambda0:.12f}")
    print(f"limit p_1     = {np.array2string(result.limits.p[0], precision=12)}")
    report = verify(problem, candidate, result.limits, tol=1e-6)
    print(report.summary())
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
