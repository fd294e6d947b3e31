"""Fitted-model archive: a JSON document that restores a FitResult exactly.

Floats are stored as shortest round-trip decimals, so a reloaded archive
predicts bit for bit like the in-memory fit it was written from.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy import sparse

from ..basis.gp import GpBasis
from ..constrain.qp import ConstrainedSolution, KktReport
from ..errors import ArchiveError
from ..gam.fitting import FitResult
from ..gam.terms import GamModel, GpTerm, LinearTerm
from ..inference.linsys import Posterior
from ..tuning.hyperspec import add_weak_priors, apply_values
from .spec import ModelSpec, build_hyperspec, build_model
from .tables import write_atomic

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class FactorRecord(BaseModel):
    """Lower Cholesky factor in triplet form."""

    rows: list[int]
    cols: list[int]
    values: list[float]
    size: int


class BasisRecord(BaseModel):
    mean: list[float]
    basis: list[list[float]]
    eigenvalues: list[float]
    energy: float


class SolutionRecord(BaseModel):
    multipliers: list[float]
    active_set: list[int]
    objective: float
    kkt: dict[str, float]
    iterations: int


class ModelArchive(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = FORMAT_VERSION
    spec: ModelSpec
    response: str
    obs_var: float | str
    hyperparameters: dict[str, float] = Field(default_factory=dict)
    weak_prior_var: float | None = None
    mean: list[float]
    factor: FactorRecord
    permutation: list[int]
    log_det_precision: float
    term_offsets: dict[str, tuple[int, int]]
    translation: list[float]
    n_obs: int
    objective: float
    gp_bases: dict[str, BasisRecord] = Field(default_factory=dict)
    input_ranges: dict[str, tuple[float, float]] = Field(default_factory=dict)
    constrained: SolutionRecord | None = None


def archive_fit(
    result: FitResult,
    spec: ModelSpec,
    data: pd.DataFrame,
    hyperparameters: dict[str, float] | None = None,
    weak_prior_var: float | None = None,
) -> ModelArchive:
    """Snapshot of ``result``; ``spec`` must already have data-derived means resolved."""
    posterior = result.posterior
    coo = posterior.factor.tocoo()
    bases = {
        t.name: BasisRecord(
            mean=t.basis.mean.tolist(),
            basis=t.basis.basis.tolist(),
            eigenvalues=t.basis.eigenvalues.tolist(),
            energy=t.basis.energy,
        )
        for t in result.model.terms
        if isinstance(t, GpTerm)
    }
    ranges = {
        t.name: (float(data[t.input].min()), float(data[t.input].max()))
        for t in result.model.terms
        if isinstance(t, LinearTerm)
    }
    solution = None
    if result.constrained is not None:
        c = result.constrained
        solution = SolutionRecord(
            multipliers=c.multipliers.tolist(),
            active_set=[int(i) for i in c.active_set],
            objective=c.objective,
            kkt={
                "primal": c.kkt.primal,
                "stationarity": c.kkt.stationarity,
                "dual": c.kkt.dual,
                "complementarity": c.kkt.complementarity,
            },
            iterations=c.iterations,
        )
    obs_var = result.model.obs_var
    return ModelArchive(
        spec=spec,
        response=result.model.response,
        obs_var=obs_var if isinstance(obs_var, str) else float(obs_var),
        hyperparameters=dict(hyperparameters or {}),
        weak_prior_var=weak_prior_var,
        mean=posterior.mean.tolist(),
        factor=FactorRecord(
            rows=coo.row.tolist(),
            cols=coo.col.tolist(),
            values=coo.data.tolist(),
            size=posterior.n_par,
        ),
        permutation=posterior.permutation.tolist(),
        log_det_precision=posterior.log_det_precision,
        term_offsets=dict(result.term_offsets),
        translation=result.translation.tolist(),
        n_obs=result.n_obs,
        objective=result.objective,
        gp_bases=bases,
        input_ranges=ranges,
        constrained=solution,
    )


def _restore_model(archive: ModelArchive) -> GamModel:
    model = build_model(archive.spec)
    if archive.weak_prior_var is not None:
        model = add_weak_priors(model, archive.weak_prior_var)
    if archive.hyperparameters:
        hyper = build_hyperspec(archive.spec)
        if hyper is None:
            raise ArchiveError("archive has tuned values but its spec declares no hyperparameters")
        model = apply_values(model, hyper, archive.hyperparameters)
    for name, record in archive.gp_bases.items():
        term = model.term(name)
        if not isinstance(term, GpTerm):
            raise ArchiveError(f"archived basis for '{name}' but the term is not a GP term")
        basis = GpBasis(
            term.basis.grid,
            np.asarray(record.mean),
            np.asarray(record.basis, dtype=np.float64).reshape(term.basis.grid.size, -1),
            np.asarray(record.eigenvalues),
            record.energy,
        )
        model = model.replace_term(replace(term, basis=basis))
    return model.with_obs_var(archive.obs_var)


def restore_fit(archive: ModelArchive) -> FitResult:
    """Rebuild the FitResult an archive was written from."""
    model = _restore_model(archive)
    if model.offsets() != {k: tuple(v) for k, v in archive.term_offsets.items()}:
        raise ArchiveError("term offsets of the rebuilt model differ from the archive")
    n = archive.factor.size
    factor = sparse.csc_array(
        (
            np.asarray(archive.factor.values, dtype=np.float64),
            (np.asarray(archive.factor.rows, dtype=np.int32), np.asarray(archive.factor.cols, dtype=np.int32)),
        ),
        shape=(n, n),
    )
    posterior = Posterior(
        np.asarray(archive.mean, dtype=np.float64),
        factor,
        np.asarray(archive.permutation, dtype=np.intp),
        archive.log_det_precision,
    )
    solution = None
    if archive.constrained is not None:
        c = archive.constrained
        solution = ConstrainedSolution(
            theta=posterior.mean,
            multipliers=np.asarray(c.multipliers, dtype=np.float64),
            active_set=np.asarray(c.active_set, dtype=np.intp),
            objective=c.objective,
            kkt=KktReport(**c.kkt),
            iterations=c.iterations,
        )
    return FitResult(
        model=model,
        posterior=posterior,
        term_offsets=model.offsets(),
        translation=np.asarray(archive.translation, dtype=np.float64),
        n_obs=archive.n_obs,
        objective=archive.objective,
        constrained=solution,
    )


def save_archive(path: Path, archive: ModelArchive) -> None:
    write_atomic(path, lambda handle: handle.write(archive.model_dump_json(indent=1)))
    logger.info("saved archive %s (%d parameters)", path, len(archive.mean))


def load_archive(path: Path) -> ModelArchive:
    try:
        archive = ModelArchive.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except (ValidationError, UnicodeDecodeError) as exc:
        raise ArchiveError(f"{path} is not a valid model archive:\n{exc}") from exc
    if archive.format_version != FORMAT_VERSION:
        raise ArchiveError(
            f"{path} has archive format {archive.format_version}, expected {FORMAT_VERSION}"
        )
    return archive
