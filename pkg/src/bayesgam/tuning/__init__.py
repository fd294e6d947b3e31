"""Hyperparameter tuning."""

from .drivers import TracePoint, TuneResult, grid_scan, minimize_log, optimize, scan
from .hyperspec import (
    HyperEntry,
    HyperSpec,
    KernelTarget,
    ObsVarTarget,
    PriorVarTarget,
    add_weak_priors,
    apply_values,
)
from .objectives import (
    contiguous_folds,
    cv_objective,
    evidence_objective,
    holdout_block,
    map_objective,
    objective_function,
)

__all__ = [
    "HyperEntry",
    "HyperSpec",
    "KernelTarget",
    "ObsVarTarget",
    "PriorVarTarget",
    "TracePoint",
    "TuneResult",
    "add_weak_priors",
    "apply_values",
    "contiguous_folds",
    "cv_objective",
    "evidence_objective",
    "grid_scan",
    "holdout_block",
    "map_objective",
    "minimize_log",
    "objective_function",
    "optimize",
    "scan",
]
