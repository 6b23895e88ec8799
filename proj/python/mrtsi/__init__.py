"""Selective inference for moderators in micro-randomized trials."""

from ._mrtsi import (
    ConfigError,
    NumericError,
    ParseError,
    ValidationError,
    analyze_csv,
    intervals,
    randomized_lasso,
    run_config,
    simulate,
)

__all__ = [
    "ConfigError",
    "NumericError",
    "ParseError",
    "ValidationError",
    "analyze_csv",
    "intervals",
    "randomized_lasso",
    "run_config",
    "simulate",
]
