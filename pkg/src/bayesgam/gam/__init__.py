"""GAM terms, assembly and fitting."""

from .fitting import (
    FitResult,
    assemble,
    design_matrix,
    draw,
    fit,
    observation_variance,
    predict,
    prior_system,
    term_design,
    term_offsets,
    term_values,
    translation,
)
from .terms import GamModel, GamTerm, GpTerm, LinearTerm, LocalTerm, data_columns

__all__ = [
    "FitResult",
    "GamModel",
    "GamTerm",
    "GpTerm",
    "LinearTerm",
    "LocalTerm",
    "assemble",
    "data_columns",
    "design_matrix",
    "draw",
    "fit",
    "observation_variance",
    "predict",
    "prior_system",
    "term_design",
    "term_offsets",
    "term_values",
    "translation",
]
