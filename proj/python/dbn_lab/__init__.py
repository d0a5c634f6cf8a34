"""Diminishing batch normalization: training, diagnostics and schedule analysis."""

from ._dbn_lab import (
    DimensionError,
    Error,
    FormatError,
    NumericError,
    ParameterError,
    alpha_at,
    check_lemma42_rule,
    check_theorem31_rule,
    classify,
    compare_alphas,
    eta_at,
    generate_synthetic,
    gradient_check,
    load_idx,
    parse_idx,
    partial_sums,
    run_experiment,
    stepsize_warnings,
    tail_bound_am,
)

__all__ = [
    "DimensionError",
    "Error",
    "FormatError",
    "NumericError",
    "ParameterError",
    "alpha_at",
    "check_lemma42_rule",
    "check_theorem31_rule",
    "classify",
    "compare_alphas",
    "eta_at",
    "generate_synthetic",
    "gradient_check",
    "load_idx",
    "parse_idx",
    "partial_sums",
    "run_experiment",
    "stepsize_warnings",
    "tail_bound_am",
]
