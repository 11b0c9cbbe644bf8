"""File formats: problem files, trajectory files, certificates, CSV reports.

All text formats are line-oriented UTF-8 key-value files.  A line is
``key value...``; ``#`` starts a comment (full-line or trailing); blank lines
are ignored.  Matrix values list row entries separated by whitespace with
rows separated by ``;`` — e.g. ``A 1 0; 0 1`` is the 2x2 identity.  Problem
files are restricted to the affine-quadratic class: stage-constant dynamics
``f(x,u) = A x + B u + c``, criterion ``phi_t = -beta^t (x'Qx + u'Ru)``, and
affine control constraints ``G u + g0 >= 0`` / ``E u + e0 = 0``.

CSV sweep reports are deterministic: fixed column order and 17-significant-
digit decimal formatting, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import io
from typing import Optional, TextIO, Union

import numpy as np

from horizon_pmp.catalog import AffineQuadraticData, affine_quadratic_problem
from horizon_pmp.certificate import Certificate, TheoremVariant
from horizon_pmp.model import ProblemSpec, SystemKind, Trajectory
from horizon_pmp.sweep import SweepResult

_FMT = "%.17g"


class ParseError(ValueError):
    """Malformed input file; carries the offending line number and field."""

    def __init__(self, line_no: Optional[int], field: str, message: str):
        where = f"line {line_no}, " if line_no is not None else ""
        super().__init__(f"{where}field {field!r}: {message}")
        self.line_no = line_no
        self.field = field


def _read_pairs(text: str) -> list[tuple[int, str, str]]:
    """(line_no, key, value) triples with comments and blanks stripped."""
    out = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        key = parts[0]
        value = parts[1].strip() if len(parts) > 1 else ""
        out.append((i, key, value))
    return out


def _parse_matrix(value: str, line_no: int, field: str) -> np.ndarray:
    rows = []
    width = None
    for chunk in value.split(";"):
        entries = chunk.split()
        if not entries:
            raise ParseError(line_no, field, "empty matrix row")
        try:
            row = [float(e) for e in entries]
        except ValueError as exc:
            raise ParseError(line_no, field, f"bad number: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(line_no, field,
                             f"ragged rows ({len(row)} vs {width} entries)")
        rows.append(row)
    return np.array(rows)


def _fmt_matrix(m: np.ndarray) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return "; ".join(" ".join(_FMT % v for v in row) for row in m)


# --- problem files ----------------------------------------------------------

_PROBLEM_REQUIRED = ("n", "d", "kind", "beta", "sigma", "A", "B", "c", "Q", "R")


def write_problem(data: AffineQuadraticData) -> str:
    lines = ["# horizon-pmp problem file (affine-quadratic class)"]
    if data.name:
        lines.append(f"name {data.name}")
    lines += [
        f"n {data.n}",
        f"d {data.d}",
        f"kind {data.kind.value}",
        f"H_max {data.H_max}",
        f"beta {_FMT % data.beta}",
        f"sigma {_fmt_matrix(data.sigma)}",
        f"A {_fmt_matrix(data.A)}",
        f"B {_fmt_matrix(data.B)}",
        f"c {_fmt_matrix(data.c)}",
        f"Q {_fmt_matrix(data.Q)}",
        f"R {_fmt_matrix(data.R)}",
    ]
    if data.G is not None:
        lines.append(f"G {_fmt_matrix(data.G)}")
        lines.append(f"g0 {_fmt_matrix(data.g0)}")
    if data.E is not None:
        lines.append(f"E {_fmt_matrix(data.E)}")
        lines.append(f"e0 {_fmt_matrix(data.e0)}")
    return "\n".join(lines) + "\n"


def parse_problem_data(text: str) -> AffineQuadraticData:
    seen: dict[str, tuple[int, str]] = {}
    for line_no, key, value in _read_pairs(text):
        if key in seen:
            raise ParseError(line_no, key, "duplicate key")
        seen[key] = (line_no, value)
    for req in _PROBLEM_REQUIRED:
        if req not in seen:
            raise ParseError(None, req, "missing required key")

    def scalar_int(key: str) -> int:
        line_no, value = seen[key]
        try:
            return int(value)
        except ValueError:
            raise ParseError(line_no, key, f"expected an integer, got {value!r}") from None

    def scalar_float(key: str) -> float:
        line_no, value = seen[key]
        try:
            return float(value)
        except ValueError:
            raise ParseError(line_no, key, f"expected a number, got {value!r}") from None

    def matrix(key: str) -> np.ndarray:
        line_no, value = seen[key]
        return _parse_matrix(value, line_no, key)

    n, d = scalar_int("n"), scalar_int("d")
    kind_line, kind_value = seen["kind"]
    try:
        kind = SystemKind(kind_value.lower())
    except ValueError:
        raise ParseError(kind_line, "kind",
                         f"expected 'equation' or 'inequation', got {kind_value!r}") from None
    kwargs = {}
    for key in ("G", "g0", "E", "e0"):
        if key in seen:
            kwargs[key] = matrix(key)
    name = seen["name"][1] if "name" in seen else ""
    H_max = scalar_int("H_max") if "H_max" in seen else 100

    def shaped(key: str, shape: tuple[int, ...]) -> np.ndarray:
        m = matrix(key)
        if m.size != int(np.prod(shape)):
            raise ParseError(seen[key][0], key,
                             f"expected {shape} entries, got shape {m.shape}")
        return m.reshape(shape)

    try:
        return AffineQuadraticData(
            A=shaped("A", (n, n)), B=shaped("B", (n, d)), c=shaped("c", (n,)),
            Q=shaped("Q", (n, n)), R=shaped("R", (d, d)),
            beta=scalar_float("beta"), sigma=shaped("sigma", (n,)),
            kind=kind, H_max=H_max, name=name, **kwargs)
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(None, "problem", str(exc)) from None


def parse_problem(text: str) -> ProblemSpec:
    return affine_quadratic_problem(parse_problem_data(text))


# --- trajectory files -------------------------------------------------------

def write_trajectory(traj: Trajectory) -> str:
    return ("# horizon-pmp trajectory file\n"
            f"states {_fmt_matrix(traj.states)}\n"
            f"controls {_fmt_matrix(traj.controls)}\n")


def parse_trajectory(text: str) -> Trajectory:
    blocks: dict[str, np.ndarray] = {}
    for line_no, key, value in _read_pairs(text):
        if key not in ("states", "controls"):
            raise ParseError(line_no, key, "unknown trajectory key")
        if key in blocks:
            raise ParseError(line_no, key, "duplicate key")
        blocks[key] = _parse_matrix(value, line_no, key)
    for req in ("states", "controls"):
        if req not in blocks:
            raise ParseError(None, req, "missing required key")
    try:
        return Trajectory(states=blocks["states"], controls=blocks["controls"])
    except Exception as exc:
        raise ParseError(None, "trajectory", str(exc)) from None


# --- certificate files ------------------------------------------------------

def write_certificate(cert: Certificate) -> str:
    lines = [
        "# horizon-pmp certificate file",
        f"variant {cert.variant.value}",
        f"lambda0 {_FMT % cert.lambda0}",
        f"p {_fmt_matrix(cert.p)}",
    ]
    if cert.mu.size:
        lines.append(f"mu {_fmt_matrix(cert.mu)}")
    if cert.eq_lambda.size:
        lines.append(f"eq_lambda {_fmt_matrix(cert.eq_lambda)}")
    return "\n".join(lines) + "\n"


def parse_certificate(text: str) -> Certificate:
    fields: dict[str, tuple[int, str]] = {}
    for line_no, key, value in _read_pairs(text):
        if key in fields:
            raise ParseError(line_no, key, "duplicate key")
        fields[key] = (line_no, value)
    for req in ("variant", "lambda0", "p"):
        if req not in fields:
            raise ParseError(None, req, "missing required key")
    line_no, text_variant = fields["variant"]
    try:
        variant = TheoremVariant.parse(text_variant)
    except ValueError as exc:
        raise ParseError(line_no, "variant", str(exc)) from None
    line_no, lam_text = fields["lambda0"]
    try:
        lam0 = float(lam_text)
    except ValueError:
        raise ParseError(line_no, "lambda0", f"expected a number, got {lam_text!r}") from None
    p = _parse_matrix(fields["p"][1], fields["p"][0], "p")
    T = p.shape[0]
    if "mu" in fields:
        mu = _parse_matrix(fields["mu"][1], fields["mu"][0], "mu")
    else:
        mu = np.zeros((T, 0))
    if "eq_lambda" in fields:
        eq = _parse_matrix(fields["eq_lambda"][1], fields["eq_lambda"][0], "eq_lambda")
    else:
        eq = np.zeros((mu.shape[0], 0))
    return Certificate(lambda0=lam0, p=p, mu=mu, eq_lambda=eq, variant=variant)


# --- CSV sweep reports ------------------------------------------------------

def write_sweep_csv(result: SweepResult, out: Union[str, TextIO]) -> None:
    """Per-horizon multiplier table with fixed columns and exact formatting.

    Columns: h, lambda0, p[t][a] over the tracked window (t = 1..W), mu[t][k]
    (t = 0..W-1), then the worst adjoint and stationarity defects of the run.
    """
    if isinstance(out, str):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            write_sweep_csv(result, fh)
        return
    W = result.window
    first = result.runs[0][1]
    n = first.p.shape[1]
    m_i = first.mu.shape[1]
    header = ["h", "lambda0"]
    header += [f"p[{t}][{a}]" for t in range(1, W + 1) for a in range(n)]
    header += [f"mu[{t}][{k}]" for t in range(W) for k in range(m_i)]
    header += ["residual_AE", "residual_WM"]
    out.write(",".join(header) + "\n")
    for h, tm in result.runs:
        res_ae = tm.residuals.get("AE", np.zeros(1))
        res_wm = tm.residuals.get("WM", np.zeros(1))
        row = [str(h), _FMT % tm.lambda0]
        row += [_FMT % v for v in tm.p[:W].reshape(-1)]
        row += [_FMT % v for v in tm.mu[:W].reshape(-1)]
        row.append(_FMT % (float(np.max(res_ae)) if np.size(res_ae) else 0.0))
        row.append(_FMT % (float(np.max(res_wm)) if np.size(res_wm) else 0.0))
        out.write(",".join(row) + "\n")


def sweep_csv_text(result: SweepResult) -> str:
    buf = io.StringIO()
    write_sweep_csv(result, buf)
    return buf.getvalue()
