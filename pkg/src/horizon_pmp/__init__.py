"""Multiplier certificates for infinite-horizon, discrete-time optimal control.

The package certifies candidate trajectories of difference equations or
inequations against first-order necessary conditions: it truncates the
infinite-horizon problem, assembles and solves the multiplier system of each
truncation on the normalization sphere, detects convergence of the
multipliers across a horizon sweep, and verifies the resulting
infinite-horizon certificate (nontriviality, signs, slackness, adjoint
equation, weak maximum condition).
"""

from horizon_pmp.model import (
    SystemKind,
    ControlVariant,
    ConstraintRow,
    ControlSetSpec,
    ProblemSpec,
    Trajectory,
    AdmissibilityReport,
    check_admissibility,
    partial_sums,
    overtaking_compare,
)
from horizon_pmp.differentials import (
    StageDerivatives,
    MonotonicityReport,
    directional_derivative,
    gateaux_matrix,
    linearity_check,
    invertibility_check,
    monotonicity_check,
    stage_derivatives,
)
from horizon_pmp.qualification import (
    FunctionalFamily,
    SeparationCertificate,
    ActiveSet,
    separation_check,
    span_co_disjoint_check,
    verify_vanishing_implication,
    active_set,
)
from horizon_pmp.truncation import (
    FiniteHorizonProblem,
    TruncatedMultipliers,
    TheoremVariant,
    reduce_to_finite_horizon,
    solve_multipliers,
    oracle_kkt,
)
from horizon_pmp.certificate import (
    Certificate,
    BoundSequence,
    ConditionReport,
    adjoint_forward,
    bound_sequence,
    verify,
)
from horizon_pmp.sweep import (
    SweepResult,
    sweep,
    recover_coefficients,
)
from horizon_pmp.problem_io import (
    ParseError,
    parse_problem,
    write_problem,
    parse_trajectory,
    write_trajectory,
    parse_certificate,
    write_certificate,
    write_sweep_csv,
    sweep_csv_text,
)
from horizon_pmp import catalog

__all__ = [
    "SystemKind",
    "ControlVariant",
    "ConstraintRow",
    "ControlSetSpec",
    "ProblemSpec",
    "Trajectory",
    "AdmissibilityReport",
    "check_admissibility",
    "partial_sums",
    "overtaking_compare",
    "StageDerivatives",
    "MonotonicityReport",
    "directional_derivative",
    "gateaux_matrix",
    "linearity_check",
    "invertibility_check",
    "monotonicity_check",
    "stage_derivatives",
    "FunctionalFamily",
    "SeparationCertificate",
    "ActiveSet",
    "separation_check",
    "span_co_disjoint_check",
    "verify_vanishing_implication",
    "active_set",
    "FiniteHorizonProblem",
    "TruncatedMultipliers",
    "TheoremVariant",
    "reduce_to_finite_horizon",
    "solve_multipliers",
    "oracle_kkt",
    "Certificate",
    "BoundSequence",
    "ConditionReport",
    "adjoint_forward",
    "bound_sequence",
    "verify",
    "SweepResult",
    "sweep",
    "recover_coefficients",
    "ParseError",
    "parse_problem",
    "write_problem",
    "parse_trajectory",
    "write_trajectory",
    "parse_certificate",
    "write_certificate",
    "write_sweep_csv",
    "sweep_csv_text",
    "catalog",
]
