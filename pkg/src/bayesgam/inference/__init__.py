"""Posterior inference for linear-Gaussian systems."""

from .linsys import (
    LOG_2PI,
    Posterior,
    factorize,
    information_vector,
    log_density,
    neg_log_posterior,
    posterior_predictive,
    precision_matrix,
    predictive_marginals,
    sample,
    solve,
)

__all__ = [
    "LOG_2PI",
    "Posterior",
    "factorize",
    "information_vector",
    "log_density",
    "neg_log_posterior",
    "posterior_predictive",
    "precision_matrix",
    "predictive_marginals",
    "sample",
    "solve",
]
