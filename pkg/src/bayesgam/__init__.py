"""Bayes GAM - Bayesian generalized additive models as sparse linear-Gaussian systems."""

__version__ = "0.1.0"
