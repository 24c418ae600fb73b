"""Sparsity and low-rank regularization with quadratic-envelope penalties.

Exact evaluation and proximal maps for non-separable cardinality penalties,
a forward-backward solver for vector and matrix least squares, optimality
certificates, and a seeded benchmark harness.
"""

from .analysis import (
    Certificate,
    CertCondition,
    MultistartReport,
    check_corollary1,
    check_theorem1,
    check_theorem2,
    check_theorem3,
    multistart_uniqueness_probe,
    mutual_coherence,
    operator_norm,
    rip_delta_bruteforce,
)
from .base import Regularizer
from .baselines import L1Penalty, LpPenalty, ScadPenalty, baseline_from_json, make_baseline
from .estimator import EnvelopeRegressor
from .harness import (
    InstanceSpec,
    TrialRecord,
    composite_score,
    experiment_local_minima,
    experiment_matrix,
    experiment_robustness,
    experiment_sparsity,
    fourier_identity_matrix,
    gen_instance,
    line_search_parameter,
    metric_support_diff,
    relative_error,
    run_experiment,
)
from .penalty import (
    EnvelopeEvaluation,
    PenaltySequence,
    ProxResult,
    QuadraticEnvelope,
    SignedSortDecomposition,
    SubgradientReport,
    cardinality,
    conjugate_value,
    evaluate_envelope,
    penalty_from_spec,
    prox_general,
    prox_unit,
    sort_decompose,
    subgradient_contains,
)
from .solver import (
    MatrixProblem,
    SolveResult,
    SolverConfig,
    VectorProblem,
    fbs_solve,
    fbs_solve_matrix,
    objective_value,
    stationarity_residual,
)

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "CertCondition",
    "EnvelopeEvaluation",
    "EnvelopeRegressor",
    "InstanceSpec",
    "L1Penalty",
    "LpPenalty",
    "MatrixProblem",
    "MultistartReport",
    "PenaltySequence",
    "ProxResult",
    "QuadraticEnvelope",
    "Regularizer",
    "ScadPenalty",
    "SignedSortDecomposition",
    "SolveResult",
    "SolverConfig",
    "SubgradientReport",
    "TrialRecord",
    "VectorProblem",
    "baseline_from_json",
    "cardinality",
    "check_corollary1",
    "check_theorem1",
    "check_theorem2",
    "check_theorem3",
    "composite_score",
    "conjugate_value",
    "evaluate_envelope",
    "experiment_local_minima",
    "experiment_matrix",
    "experiment_robustness",
    "experiment_sparsity",
    "fbs_solve",
    "fbs_solve_matrix",
    "fourier_identity_matrix",
    "gen_instance",
    "line_search_parameter",
    "make_baseline",
    "metric_support_diff",
    "multistart_uniqueness_probe",
    "mutual_coherence",
    "objective_value",
    "operator_norm",
    "penalty_from_spec",
    "prox_general",
    "prox_unit",
    "relative_error",
    "rip_delta_bruteforce",
    "run_experiment",
    "sort_decompose",
    "stationarity_residual",
    "subgradient_contains",
]
