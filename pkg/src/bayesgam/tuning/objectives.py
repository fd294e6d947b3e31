"""Hyperparameter selection criteria: joint MAP, evidence and cross-validation.

All objectives are minimized. The joint MAP objective is unbounded below
when a prior variance goes to zero and the data can be fit inside the
prior's null space; keep bounds on its search.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import sparse

from ..errors import ImproperPrior, InvalidTuning, SingularPosterior
from ..gam.fitting import assemble, design_matrix, observation_variance, translation
from ..gam.terms import GamModel
from ..inference.linsys import (
    LOG_2PI,
    Posterior,
    factorize,
    log_density,
    neg_log_posterior,
    posterior_predictive,
    solve,
)
from ..models import Objective
from .hyperspec import HyperSpec, apply_values

logger = logging.getLogger(__name__)

ObjectiveFn = Callable[[Mapping[str, float]], float]


def map_objective(
    model: GamModel,
    data: pd.DataFrame,
    spec: HyperSpec,
    values: Mapping[str, float],
    *,
    pivot_tolerance: float = 1e-13,
    backend: str = "auto",
) -> float:
    """Negative joint log density of data and MAP parameters, up to a constant."""
    system = assemble(apply_values(model, spec, values), data)
    posterior = solve(system, pivot_tolerance=pivot_tolerance, backend=backend)
    value = neg_log_posterior(system, posterior.mean)
    value += 0.5 * float(np.sum(np.log(system.obs_var)))
    value += 0.5 * float(np.sum(np.log(system.prior_var)))
    logger.debug("map objective at %s: %.10g", dict(values), value)
    return value


def evidence_objective(
    model: GamModel,
    data: pd.DataFrame,
    spec: HyperSpec,
    values: Mapping[str, float],
    *,
    pivot_tolerance: float = 1e-13,
    backend: str = "auto",
) -> float:
    """Negative log marginal likelihood ``-log p(y | hyperparameters)``.

    Needs a proper prior: ``B' V B`` must be positive definite.
    """
    system = assemble(apply_values(model, spec, values), data)
    B = system.prior_transform
    prior_precision = sparse.csr_array(B.T @ sparse.diags_array(1.0 / system.prior_var) @ B)
    try:
        L, perm, log_det_prior = factorize(
            prior_precision, pivot_tolerance=pivot_tolerance, backend=backend
        )
    except SingularPosterior as exc:
        raise ImproperPrior(
            "the prior alone is improper (direction of parameter "
            f"{exc.pivot} is unconstrained); add weak priors, e.g. identity rows "
            "with a large variance, before using the evidence"
        ) from exc
    posterior = solve(system, pivot_tolerance=pivot_tolerance, backend=backend)

    # mu_B solves (B'VB) mu_B = B'V mu_pr.
    prior = Posterior(np.zeros(system.n_par), L, perm, log_det_prior)
    mu_b = prior.solve_precision(B.T @ (system.prior_mean / system.prior_var))
    theta = posterior.mean
    residual = system.obs - system.design @ theta
    offset = theta - mu_b
    quadratic = float(np.sum(residual**2 / system.obs_var)) + float(
        offset @ (prior_precision @ offset)
    )
    return 0.5 * (
        system.n_obs * LOG_2PI
        + float(np.sum(np.log(system.obs_var)))
        + posterior.log_det_precision
        - log_det_prior
        + quadratic
    )


def cv_objective(
    model: GamModel,
    data: pd.DataFrame,
    spec: HyperSpec,
    values: Mapping[str, float],
    folds: Sequence[np.ndarray],
    *,
    pivot_tolerance: float = 1e-13,
    backend: str = "auto",
) -> float:
    """Sum over folds of the negative held-out predictive log density."""
    if not folds:
        raise InvalidTuning("cross-validation needs at least one fold")
    tuned = apply_values(model, spec, values)
    n = len(data)
    total = 0.0
    for k, fold in enumerate(folds):
        held = np.asarray(fold, dtype=np.intp)
        if held.size == 0:
            raise InvalidTuning(f"fold {k} is empty")
        train = np.setdiff1d(np.arange(n), held)
        if train.size == 0:
            raise InvalidTuning(f"fold {k} leaves no training rows")
        train_data, held_data = data.iloc[train], data.iloc[held]
        try:
            posterior = solve(
                assemble(tuned, train_data), pivot_tolerance=pivot_tolerance, backend=backend
            )
        except SingularPosterior as exc:
            raise SingularPosterior(exc.pivot, fold=k) from exc
        mean, cov = posterior_predictive(
            posterior,
            design_matrix(tuned, held_data),
            observation_variance(tuned, held_data),
        )
        y = held_data[tuned.response].to_numpy(dtype=np.float64)
        total -= log_density(mean + translation(tuned, held_data), cov, y)
    return total


def holdout_block(n_obs: int, size: int, start: int | None = None) -> list[np.ndarray]:
    """One contiguous held-out block; the last ``size`` rows by default."""
    if not 0 < size < n_obs:
        raise InvalidTuning(f"holdout size must lie in (0, {n_obs}), got {size}")
    first = n_obs - size if start is None else start
    if not 0 <= first <= n_obs - size:
        raise InvalidTuning(f"holdout block starting at {first} does not fit {n_obs} rows")
    return [np.arange(first, first + size)]


def contiguous_folds(n_obs: int, n_folds: int) -> list[np.ndarray]:
    """Split ``range(n_obs)`` into ``n_folds`` contiguous, near-equal blocks."""
    if not 2 <= n_folds <= n_obs:
        raise InvalidTuning(f"need 2 <= n_folds <= {n_obs}, got {n_folds}")
    return [np.asarray(block) for block in np.array_split(np.arange(n_obs), n_folds)]


def objective_function(
    model: GamModel,
    data: pd.DataFrame,
    spec: HyperSpec,
    objective: Objective,
    *,
    folds: Sequence[np.ndarray] | None = None,
    cv_holdout: int = 10,
    pivot_tolerance: float = 1e-13,
    backend: str = "auto",
) -> ObjectiveFn:
    """Bind model and data into ``values -> score`` for the search drivers."""
    if objective is Objective.MAP:
        return lambda values: map_objective(
            model, data, spec, values, pivot_tolerance=pivot_tolerance, backend=backend
        )
    if objective is Objective.EVIDENCE:
        return lambda values: evidence_objective(
            model, data, spec, values, pivot_tolerance=pivot_tolerance, backend=backend
        )
    chosen = list(folds) if folds is not None else holdout_block(len(data), cv_holdout)
    return lambda values: cv_objective(
        model, data, spec, values, chosen, pivot_tolerance=pivot_tolerance, backend=backend
    )

