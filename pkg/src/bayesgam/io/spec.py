"""JSON model specification and its translation into a GamModel."""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..basis.kernels import Kernel, Periodic, Separable, SquaredExponential, Symmetric
from ..basis.local import (
    PerTermMean,
    SharedMean,
    along_axis,
    difference_operator,
    identifiability_prior,
    knot_profile,
    periodic_rows,
    spatial_std_profile,
    symmetry_rows,
)
from ..constrain.shapes import convex_constraint, monotone_constraint, term_constraint
from ..errors import MissingColumn, SpecError
from ..gam.terms import GamModel, GamTerm, GpTerm, LinearTerm, LocalTerm
from ..models import ConstraintSet, Direction, Grid, PriorBlock
from ..tuning.hyperspec import (
    HyperEntry,
    HyperSpec,
    KernelTarget,
    ObsVarTarget,
    PriorVarTarget,
    Target,
)

KERNEL_PARAMETERS = {"sigma2": "variance", "length": "length", "period": "period"}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AxisRange(_Strict):
    """Equispaced knots ``numpy.linspace(start, stop, num)``."""

    start: float
    stop: float
    num: int = Field(ge=2)


class GridSpec(_Strict):
    """Grid axes as explicit knot arrays or ranges."""

    axes: list[list[float] | AxisRange] = Field(min_length=1)

    def build(self) -> Grid:
        axes = [
            np.linspace(a.start, a.stop, a.num) if isinstance(a, AxisRange) else np.asarray(a)
            for a in self.axes
        ]
        return Grid(tuple(axes))


class KernelSpec(_Strict):
    type: Literal["squared_exponential", "periodic"]
    sigma2: float = Field(gt=0)
    length: float = Field(gt=0)
    period: float | None = Field(default=None, gt=0)
    symmetric: bool = False

    def build(self) -> Kernel:
        kernel: Kernel
        if self.type == "periodic":
            if self.period is None:
                raise SpecError("periodic kernel needs a period")
            kernel = Periodic(self.sigma2, self.length, self.period)
        else:
            kernel = SquaredExponential(self.sigma2, self.length)
        return Symmetric(kernel) if self.symmetric else kernel


class StdProfile(_Strict):
    """Per-knot standard deviations along the prior's axis."""

    profile: list[float] = Field(min_length=2)


class DiffPrior(_Strict):
    type: Literal["diff"]
    order: int = Field(ge=1)
    axis: int = 0
    std: float | StdProfile


class PeriodicPrior(_Strict):
    type: Literal["periodic"]
    axis: int = 0
    match_derivatives: int = Field(default=1, ge=0)
    std: float | list[float]
    period: float | None = None


class SymmetricPrior(_Strict):
    type: Literal["symmetric"]
    axis: int = 0
    center: float
    std: float | list[float]


class IdentifiabilityPrior(_Strict):
    type: Literal["identifiability"]
    mode: Literal["per_term", "shared"] = "per_term"
    mean: float | Literal["data"] = 0.0
    tau: float = Field(gt=0)


PriorSpec = Annotated[
    DiffPrior | PeriodicPrior | SymmetricPrior | IdentifiabilityPrior,
    Field(discriminator="type"),
]


class MonotoneSpec(_Strict):
    axis: int = 0
    direction: Literal["increasing", "decreasing"] = "increasing"


class ConvexSpec(_Strict):
    axis: int = 0


class ConstraintsSpec(_Strict):
    monotone: MonotoneSpec | None = None
    convex: ConvexSpec | None = None


class LinearPriorSpec(_Strict):
    mean: float = 0.0
    var: float = Field(gt=0)


class LinearTermSpec(_Strict):
    kind: Literal["linear"]
    name: str
    inputs: list[str] = Field(min_length=1, max_length=1)
    multiplier: str | None = None
    prior: LinearPriorSpec | None = None


class GpTermSpec(_Strict):
    kind: Literal["gp"]
    name: str
    inputs: list[str] = Field(min_length=1)
    multiplier: str | None = None
    grid: GridSpec
    kernel: KernelSpec | list[KernelSpec]
    energy_threshold: float | None = Field(default=None, gt=0, le=1)
    mean: float = 0.0
    constraints: ConstraintsSpec | None = None


class LocalTermSpec(_Strict):
    kind: Literal["local"]
    name: str
    inputs: list[str] = Field(min_length=1)
    multiplier: str | None = None
    grid: GridSpec
    priors: list[PriorSpec] = Field(default_factory=list)
    constraints: ConstraintsSpec | None = None


TermSpec = Annotated[LinearTermSpec | GpTermSpec | LocalTermSpec, Field(discriminator="kind")]


class HyperTargetSpec(_Strict):
    kind: Literal["obs_var", "prior", "kernel"]
    term: str | None = None
    block: int = 0
    parameter: Literal["sigma2", "length", "period"] | None = None
    factor: int | None = None

    def build(self) -> Target:
        if self.kind == "obs_var":
            return ObsVarTarget()
        if self.term is None:
            raise SpecError(f"{self.kind} hyperparameter target needs a term")
        if self.kind == "prior":
            return PriorVarTarget(self.term, self.block)
        if self.parameter is None:
            raise SpecError("kernel hyperparameter target needs a parameter")
        return KernelTarget(self.term, KERNEL_PARAMETERS[self.parameter], self.factor)


class HyperEntrySpec(_Strict):
    name: str
    target: HyperTargetSpec
    bounds: tuple[float, float]
    grid: list[float] | None = None


class ModelSpec(_Strict):
    """Declarative GAM: response, noise, terms and tunable hyperparameters."""

    response: str = "y"
    obs_var: float | str = 1.0
    terms: list[TermSpec] = Field(min_length=1)
    hyper: list[HyperEntrySpec] = Field(default_factory=list)

    @field_validator("obs_var")
    @classmethod
    def _positive_obs_var(cls, value: float | str) -> float | str:
        if isinstance(value, float) and not value > 0:
            raise ValueError("obs_var must be positive")
        return value


def load_spec(path: Path) -> ModelSpec:
    """Parse and validate a JSON model specification."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SpecError(f"{path} is not a UTF-8 JSON document") from exc
    return ModelSpec.model_validate_json(text)


def _axis_knots(grid: Grid, axis: int, term: str) -> np.ndarray:
    if not 0 <= axis < grid.ndim:
        raise SpecError(f"term '{term}': prior axis {axis} out of range for a {grid.ndim}-D grid")
    return grid.axes[axis]


def _std_for(prior: DiffPrior, grid: Grid, term: str) -> np.ndarray | float:
    if isinstance(prior.std, StdProfile):
        fn = knot_profile(_axis_knots(grid, prior.axis, term), prior.std.profile)
        return spatial_std_profile(grid, prior.axis, prior.order, fn)
    return prior.std


def _uses_data_mean(spec: ModelSpec) -> bool:
    return any(
        isinstance(p, IdentifiabilityPrior) and p.mean == "data"
        for t in spec.terms
        if isinstance(t, LocalTermSpec)
        for p in t.priors
    )


def resolve_spec(spec: ModelSpec, data: pd.DataFrame) -> ModelSpec:
    """Copy of ``spec`` with ``"data"`` prior means replaced by the response mean."""
    if not _uses_data_mean(spec):
        return spec
    if spec.response not in data.columns:
        raise MissingColumn(spec.response)
    level = float(data[spec.response].mean())
    terms: list[LinearTermSpec | GpTermSpec | LocalTermSpec] = []
    for t in spec.terms:
        if isinstance(t, LocalTermSpec):
            priors = [
                p.model_copy(update={"mean": level})
                if isinstance(p, IdentifiabilityPrior) and p.mean == "data"
                else p
                for p in t.priors
            ]
            t = t.model_copy(update={"priors": priors})
        terms.append(t)
    return spec.model_copy(update={"terms": terms})


def _prior_block(
    prior: DiffPrior | PeriodicPrior | SymmetricPrior | IdentifiabilityPrior,
    grid: Grid,
    term: str,
) -> PriorBlock:
    if isinstance(prior, DiffPrior):
        std = _std_for(prior, grid, term)
        return difference_operator(grid, prior.axis, prior.order, std).to_prior()
    if isinstance(prior, PeriodicPrior):
        block = periodic_rows(
            _axis_knots(grid, prior.axis, term), prior.match_derivatives, prior.std, prior.period
        )
        return along_axis(block, grid, prior.axis)
    if isinstance(prior, SymmetricPrior):
        block = symmetry_rows(_axis_knots(grid, prior.axis, term), prior.center, prior.std)
        return along_axis(block, grid, prior.axis)
    if prior.mode == "shared":
        return identifiability_prior(grid.size, SharedMean(prior.tau))
    if prior.mean == "data":
        raise SpecError(f"term '{term}': data-derived prior mean needs the data table")
    return identifiability_prior(grid.size, PerTermMean(prior.tau, prior.mean))


def build_term(
    spec: LinearTermSpec | GpTermSpec | LocalTermSpec, *, energy_threshold: float = 0.9999
) -> GamTerm:
    if isinstance(spec, LinearTermSpec):
        prior = spec.prior
        return LinearTerm(
            spec.name,
            spec.inputs[0],
            spec.multiplier,
            prior.mean if prior else 0.0,
            prior.var if prior else None,
        )
    grid = spec.grid.build()
    if len(spec.inputs) != grid.ndim:
        raise SpecError(f"term '{spec.name}' has {len(spec.inputs)} inputs, grid {grid.ndim} axes")
    if isinstance(spec, GpTermSpec):
        kernels = spec.kernel if isinstance(spec.kernel, list) else [spec.kernel]
        kernel = (
            Separable(tuple(k.build() for k in kernels)) if len(kernels) > 1 else kernels[0].build()
        )
        mean_value = spec.mean
        return GpTerm.build(
            spec.name,
            kernel,
            grid,
            spec.inputs,
            energy_threshold=spec.energy_threshold or energy_threshold,
            mean_fn=(lambda points: np.full(points.shape[0], mean_value)) if mean_value else None,
            multiplier=spec.multiplier,
        )
    priors = tuple(_prior_block(p, grid, spec.name) for p in spec.priors)
    return LocalTerm(spec.name, tuple(spec.inputs), grid, priors, spec.multiplier)


def build_model(
    spec: ModelSpec, data: pd.DataFrame | None = None, *, energy_threshold: float = 0.9999
) -> GamModel:
    """GamModel described by ``spec``; ``data`` resolves data-derived prior means."""
    if data is not None:
        spec = resolve_spec(spec, data)
    terms = tuple(build_term(t, energy_threshold=energy_threshold) for t in spec.terms)
    return GamModel(terms, spec.response, spec.obs_var)


def build_constraints(spec: ModelSpec, model: GamModel) -> ConstraintSet | None:
    """Model-level shape constraints declared on the terms, if any."""
    sets = []
    for t in spec.terms:
        declared = getattr(t, "constraints", None)
        if declared is None:
            continue
        term = model.term(t.name)
        grid = term.basis.grid if isinstance(term, GpTerm) else getattr(term, "grid", None)
        if grid is None:
            raise SpecError(f"term '{t.name}' has no grid to constrain")
        if declared.monotone is not None:
            local = monotone_constraint(
                grid, declared.monotone.axis, Direction(declared.monotone.direction)
            )
            sets.append(term_constraint(local, model, t.name))
        if declared.convex is not None:
            local = convex_constraint(grid, declared.convex.axis)
            sets.append(term_constraint(local, model, t.name))
    return ConstraintSet.stack(sets) if sets else None


def build_hyperspec(spec: ModelSpec) -> HyperSpec | None:
    """Tunable hyperparameters declared in ``spec``, if any."""
    if not spec.hyper:
        return None
    return HyperSpec(
        tuple(
            HyperEntry(
                h.name,
                h.target.build(),
                h.bounds[0],
                h.bounds[1],
                tuple(h.grid) if h.grid is not None else None,
            )
            for h in spec.hyper
        )
    )
