"""Assembling, fitting and querying a GAM."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy import sparse

from ..constrain.qp import ConstrainedSolution, solve_constrained
from ..errors import ConstrainedSampling, EmptyData, InvalidSystem, MissingColumn
from ..inference.linsys import (
    Posterior,
    neg_log_posterior,
    predictive_marginals,
    sample,
    solve,
)
from ..models import ConstraintSet, FloatArray, LinearGaussianSystem
from .terms import GamModel, data_columns

logger = logging.getLogger(__name__)


def term_offsets(model: GamModel) -> dict[str, tuple[int, int]]:
    """Parameter slice ``(start, stop)`` of every term."""
    return model.offsets()


def design_matrix(model: GamModel, data: pd.DataFrame) -> sparse.csr_array:
    """Observation matrix ``A`` for the rows of ``data``."""
    blocks = [term.design(data)[0] for term in model.terms]
    return sparse.csr_array(sparse.hstack(blocks, format="csr"))


def translation(model: GamModel, data: pd.DataFrame) -> FloatArray:
    """Known offset (GP prior means) added to ``A theta`` for each row."""
    total = np.zeros(len(data))
    for term in model.terms:
        total += term.design(data)[1]
    return total


def observation_variance(model: GamModel, data: pd.DataFrame) -> FloatArray:
    """Per-row noise variance from the model's scalar or column."""
    if isinstance(model.obs_var, str):
        values = data_columns(data, [model.obs_var])[:, 0]
    else:
        values = np.full(len(data), float(model.obs_var))
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise InvalidSystem("observation variances must be finite and positive")
    return values


def prior_system(model: GamModel) -> tuple[sparse.csr_array, FloatArray, FloatArray]:
    """Block-diagonal prior ``(B, mean, var)`` over all model parameters."""
    rows, cols, vals, means, variances = [], [], [], [], []
    row_start = 0
    for term, (start, _) in zip(model.terms, model.offsets().values(), strict=True):
        block = term.prior()
        if block is None:
            continue
        coo = block.transform.tocoo()
        rows.append(coo.row + row_start)
        cols.append(coo.col + start)
        vals.append(coo.data)
        means.append(block.mean)
        variances.append(block.var)
        row_start += block.n_rows
    if not rows:
        return sparse.csr_array((0, model.n_par)), np.zeros(0), np.zeros(0)
    B = sparse.csr_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(row_start, model.n_par),
    )
    return B, np.concatenate(means), np.concatenate(variances)


def assemble(model: GamModel, data: pd.DataFrame) -> LinearGaussianSystem:
    """Linear-Gaussian system of ``model`` on ``data``; GP means are subtracted from y."""
    if len(data) == 0:
        raise EmptyData("data table has no rows")
    if model.response not in data.columns:
        raise MissingColumn(model.response)
    y = data[model.response].to_numpy(dtype=np.float64)
    B, prior_mean, prior_var = prior_system(model)
    return LinearGaussianSystem(
        design=design_matrix(model, data),
        obs=y - translation(model, data),
        obs_var=observation_variance(model, data),
        prior_transform=B,
        prior_mean=prior_mean,
        prior_var=prior_var,
    )


@dataclass(frozen=True, eq=False)
class FitResult:
    """Posterior of a fitted model plus what is needed to query it."""

    model: GamModel
    posterior: Posterior
    term_offsets: dict[str, tuple[int, int]]
    translation: FloatArray  # training-row offsets
    n_obs: int
    objective: float  # neg_log_posterior at the reported mean
    constrained: ConstrainedSolution | None = None

    @property
    def mean(self) -> FloatArray:
        return self.posterior.mean

    def coefficients(self, name: str) -> FloatArray:
        """Posterior mean block of one term."""
        self.model.term(name)
        start, stop = self.term_offsets[name]
        return self.posterior.mean[start:stop]


def fit(
    model: GamModel,
    data: pd.DataFrame,
    constraints: ConstraintSet | None = None,
    *,
    jitter: float = 0.0,
    pivot_tolerance: float = 1e-13,
    backend: str = "auto",
) -> FitResult:
    """Posterior of ``model`` given ``data``.

    With constraints the reported mean is the constrained MAP; variances
    still describe the unconstrained Gaussian posterior.
    """
    system = assemble(model, data)
    posterior = solve(
        system, jitter=jitter, pivot_tolerance=pivot_tolerance, backend=backend
    )
    solution = None
    if constraints is not None and constraints.n_rows:
        solution = solve_constrained(system, constraints)
        posterior = replace(posterior, mean=solution.theta)
    objective = neg_log_posterior(system, posterior.mean)
    logger.info(
        "fitted %d terms: %d observations, %d parameters, objective %.6g",
        len(model.terms),
        system.n_obs,
        system.n_par,
        objective,
    )
    return FitResult(
        model=model,
        posterior=posterior,
        term_offsets=model.offsets(),
        translation=translation(model, data),
        n_obs=system.n_obs,
        objective=objective,
        constrained=solution,
    )


def predict(
    result: FitResult, data: pd.DataFrame, include_noise: bool = False
) -> tuple[FloatArray, FloatArray]:
    """Predictive mean and marginal variance at the rows of ``data``."""
    model = result.model
    rows = design_matrix(model, data)
    noise = observation_variance(model, data) if include_noise else None
    mean, var = predictive_marginals(result.posterior, rows, noise)
    return mean + translation(model, data), var


def term_design(
    model: GamModel, name: str, query: ArrayLike
) -> tuple[sparse.csr_array, FloatArray]:
    """Rows over all model parameters giving term ``name`` at ``query``."""
    term = model.term(name)
    start, _ = model.offsets()[name]
    rows, shift = term.basis_rows(query)
    coo = rows.tocoo()
    full = sparse.csr_array(
        (coo.data, (coo.row, coo.col + start)), shape=(rows.shape[0], model.n_par)
    )
    return full, shift


def term_values(
    result: FitResult, name: str, query: ArrayLike
) -> tuple[FloatArray, FloatArray]:
    """Posterior mean and std of one term (without multiplier) at ``query`` points."""
    rows, shift = term_design(result.model, name, query)
    mean, var = predictive_marginals(result.posterior, rows)
    return mean + shift, np.sqrt(np.clip(var, 0.0, None))


def draw(
    result: FitResult, count: int, rng: np.random.Generator | int | None = None
) -> FloatArray:
    """Posterior parameter draws; refused for constrained fits."""
    if result.constrained is not None:
        raise ConstrainedSampling("sampling under shape constraints is not supported")
    return sample(result.posterior, count, rng)
