"""Python access to the innosurv core: evaluation, mixture, survival and the pipeline."""

from ._core import (
    DomainError,
    Error,
    NumericalError,
    ParseError,
    auc,
    classify,
    hazard_ratio,
    kaplan_meier,
    logrank,
    mix,
    optimize_weight,
    roc,
    run_cli,
    run_pipeline,
    select_cutoff,
    __version__,
)

__all__ = [
    "DomainError",
    "Error",
    "NumericalError",
    "ParseError",
    "auc",
    "classify",
    "hazard_ratio",
    "kaplan_meier",
    "logrank",
    "mix",
    "optimize_weight",
    "roc",
    "run_cli",
    "run_pipeline",
    "select_cutoff",
    "__version__",
]
