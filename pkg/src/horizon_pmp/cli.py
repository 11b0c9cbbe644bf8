"""Command-line interface.

Subcommands: ``certify`` (sweep + limit verification), ``sweep`` (CSV of
per-horizon multipliers), ``qualify`` (constraint-qualification separation at
one stage), ``catalog`` (built-in problems), ``check`` (admissibility only).

Exit codes: 0 = pass, 1 = condition failure / infeasibility, 2 = input error.
The environment variable HORIZON_PMP_TOL overrides the default verification
tolerance.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

import numpy as np

from horizon_pmp.catalog import (
    CATALOG_NAMES,
    catalog_candidate,
    catalog_data,
)
from horizon_pmp.certificate import TheoremVariant, verify
from horizon_pmp.differentials import stage_derivatives
from horizon_pmp.model import ProblemSpec, Trajectory, check_admissibility
from horizon_pmp.problem_io import (
    ParseError,
    parse_problem,
    parse_trajectory,
    write_problem,
    write_sweep_csv,
    write_trajectory,
)
from horizon_pmp.qualification import (
    FunctionalFamily,
    SeparationOutcome,
    separation_check,
    span_co_disjoint_check,
)
from horizon_pmp.sweep import sweep as run_sweep
from horizon_pmp.truncation import default_variant

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2

_DEFAULT_H_LIST = (10, 20, 40, 80)


def _default_tol() -> float:
    raw = os.environ.get("HORIZON_PMP_TOL")
    if raw is None:
        return 1e-6
    try:
        return float(raw)
    except ValueError:
        raise SystemExit(
            f"HORIZON_PMP_TOL must be a number, got {raw!r}") from None


def _load_problem(path: str) -> ProblemSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_problem(fh.read())


def _load_trajectory(path: str) -> Trajectory:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trajectory(fh.read())


def _parse_h_spec(spec: str) -> list[int]:
    """'A..B', 'A..B:step', or a comma list like '10,20,40'."""
    try:
        if ".." in spec:
            head, _, step_txt = spec.partition(":")
            a_txt, _, b_txt = head.partition("..")
            a, b = int(a_txt), int(b_txt)
            step = int(step_txt) if step_txt else 1
            if step < 1 or b < a:
                raise ValueError
            return list(range(a, b + 1, step))
        return [int(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        raise ParseError(None, "--h", f"bad horizon spec {spec!r}") from None


def _pick_h_list(problem: ProblemSpec, candidate: Trajectory) -> list[int]:
    top = min(problem.H_max - 1, candidate.horizon)
    hs = [h for h in _DEFAULT_H_LIST if h <= top]
    if len(hs) < 2:
        lo = max(2, top // 2)
        hs = sorted({lo, top})
    if len(hs) < 2:
        raise ParseError(None, "trajectory",
                         "candidate too short for a horizon sweep (need h >= 3)")
    return hs


def _cmd_certify(args) -> int:
    problem = _load_problem(args.problem)
    candidate = _load_trajectory(args.trajectory)
    variant = TheoremVariant.parse(args.variant) if args.variant else default_variant(problem)
    tol = args.tol if args.tol is not None else _default_tol()
    h_list = _parse_h_spec(args.h) if args.h else _pick_h_list(problem, candidate)
    window = args.window
    result = run_sweep(problem, candidate, h_list, variant=variant,
                       extend_to=window)
    lines = [f"sweep horizons: {', '.join(str(h) for h in h_list)}",
             f"converged: {result.converged}"]
    if result.failed_h:
        lines.append(f"no certificate at h: {', '.join(map(str, result.failed_h))}")
    if not result.converged or result.limits is None:
        report_text = "\n".join(lines) + "\nno limit certificate; FAIL\n"
        _emit(report_text, args.report)
        return EXIT_FAIL
    report = verify(problem, candidate, result.limits, tol=tol)
    lines.append(report.summary())
    report_text = "\n".join(lines) + "\n"
    _emit(report_text, args.report)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_sweep(args) -> int:
    problem = _load_problem(args.problem)
    candidate = _load_trajectory(args.trajectory)
    variant = TheoremVariant.parse(args.variant) if args.variant else None
    h_list = _parse_h_spec(args.h)
    result = run_sweep(problem, candidate, h_list, variant=variant)
    if args.out:
        write_sweep_csv(result, args.out)
    else:
        write_sweep_csv(result, sys.stdout)
    profile = "; ".join(
        f"{k}: " + " ".join("%.3e" % v for v in vals)
        for k, vals in result.cauchy_profile.items())
    print(f"# cauchy profile -- {profile}", file=sys.stderr)
    print(f"# converged: {result.converged}", file=sys.stderr)
    return EXIT_PASS if result.converged else EXIT_FAIL


def _cmd_qualify(args) -> int:
    problem = _load_problem(args.problem)
    candidate = _load_trajectory(args.trajectory)
    t = args.t
    if not 0 <= t <= candidate.horizon:
        raise ParseError(None, "--t", f"stage {t} outside materialized range")
    dv = stage_derivatives(problem, candidate, t)
    u = candidate.controls[t]
    tol = args.active_tol
    active_rows, labels = [], []
    for k, row in enumerate(problem.controls.g_rows):
        if abs(float(row.fn(t, u))) <= tol:
            active_rows.append(dv.Dg[k])
            labels.append(row.label or f"g[{k}]")
    if not active_rows:
        print(f"stage {t}: no active inequality rows; qualification is vacuous")
        return EXIT_PASS
    ineq = FunctionalFamily(rows=np.array(active_rows), labels=tuple(labels))
    if problem.controls.m_e:
        eq = FunctionalFamily(
            rows=dv.De,
            labels=tuple(r.label or f"e[{j}]" for j, r in enumerate(problem.controls.e_rows)))
        cert = span_co_disjoint_check(eq, ineq)
    else:
        cert = separation_check(ineq)
    print(f"stage {t}: {cert.outcome.value}")
    if cert.witness is not None:
        print("witness " + " ".join("%.17g" % v for v in cert.witness))
    if cert.convex_coeffs is not None:
        print("convex_coeffs " + " ".join("%.17g" % v for v in cert.convex_coeffs))
    if cert.span_coeffs is not None and np.size(cert.span_coeffs):
        print("span_coeffs " + " ".join("%.17g" % v for v in cert.span_coeffs))
    qualified = cert.outcome in (SeparationOutcome.SEPARATED, SeparationOutcome.DISJOINT)
    return EXIT_PASS if qualified else EXIT_FAIL


def _cmd_catalog(args) -> int:
    if args.action == "list":
        for name in CATALOG_NAMES:
            data = catalog_data(name)
            kind = data.kind.value
            m_i = 0 if data.G is None else data.G.shape[0]
            m_e = 0 if data.E is None else data.E.shape[0]
            print(f"{name}: n={data.n} d={data.d} kind={kind} "
                  f"m_i={m_i} m_e={m_e} beta={data.beta:g}")
        return EXIT_PASS
    # emit
    if not args.name:
        raise ParseError(None, "NAME", "catalog emit needs a problem name")
    try:
        data = catalog_data(args.name)
    except KeyError as exc:
        raise ParseError(None, "NAME", str(exc)) from None
    text = write_problem(data)
    _emit(text, args.out)
    if args.trajectory_out:
        stages = args.stages or data.H_max - 1
        traj = catalog_candidate(args.name, stages)
        with open(args.trajectory_out, "w", encoding="utf-8") as fh:
            fh.write(write_trajectory(traj))
    return EXIT_PASS


def _cmd_check(args) -> int:
    problem = _load_problem(args.problem)
    candidate = _load_trajectory(args.trajectory)
    tol = args.tol if args.tol is not None else 1e-9
    report = check_admissibility(problem, candidate, tol)
    print(report)
    print("slack " + "; ".join(
        " ".join("%.17g" % v for v in row) for row in report.slack))
    return EXIT_PASS if report.feasible else EXIT_FAIL


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="horizon-pmp",
        description="Multiplier certificates for infinite-horizon discrete-time "
                    "optimal control, via finite-horizon truncation.")
    sub = parser.add_subparsers(dest="command", required=True)

    cert = sub.add_parser("certify", help="sweep horizons, verify the limit certificate")
    cert.add_argument("--problem", required=True)
    cert.add_argument("--trajectory", required=True)
    cert.add_argument("--variant", default=None)
    cert.add_argument("--tol", type=float, default=None)
    cert.add_argument("--window", type=int, default=None,
                      help="extend the limit costate rows up to this stage")
    cert.add_argument("--h", default=None, help="horizon list A..B[:step] or comma list")
    cert.add_argument("--report", default=None, help="write the report here instead of stdout")
    cert.set_defaults(fn=_cmd_certify)

    sw = sub.add_parser("sweep", help="per-horizon multipliers as CSV")
    sw.add_argument("--problem", required=True)
    sw.add_argument("--trajectory", required=True)
    sw.add_argument("--h", required=True, help="horizon list A..B[:step] or comma list")
    sw.add_argument("--variant", default=None)
    sw.add_argument("--out", default=None, help="CSV path (default: stdout)")
    sw.set_defaults(fn=_cmd_sweep)

    qual = sub.add_parser("qualify", help="constraint-qualification separation at a stage")
    qual.add_argument("--problem", required=True)
    qual.add_argument("--trajectory", required=True)
    qual.add_argument("--t", type=int, required=True)
    qual.add_argument("--active-tol", type=float, default=1e-8)
    qual.set_defaults(fn=_cmd_qualify)

    cat = sub.add_parser("catalog", help="list built-in problems or emit one")
    cat.add_argument("action", choices=("list", "emit"))
    cat.add_argument("name", nargs="?", default=None)
    cat.add_argument("--out", default=None)
    cat.add_argument("--trajectory-out", default=None,
                     help="also write the documented candidate trajectory")
    cat.add_argument("--stages", type=int, default=None)
    cat.set_defaults(fn=_cmd_catalog)

    chk = sub.add_parser("check", help="admissibility report only")
    chk.add_argument("--problem", required=True)
    chk.add_argument("--trajectory", required=True)
    chk.add_argument("--tol", type=float, default=None)
    chk.set_defaults(fn=_cmd_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
