"""Hyperparameters: what they control and how they are applied to a model."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from ..basis.local import PerTermMean, identifiability_prior
from ..errors import OutOfBounds, SpecError
from ..gam.terms import GamModel, GpTerm, LinearTerm, LocalTerm


@dataclass(frozen=True)
class ObsVarTarget:
    """The scalar observation noise variance."""


@dataclass(frozen=True)
class PriorVarTarget:
    """Reference variance of one prior block of a term.

    Rows keep their ratio to the block's largest variance, so a spatial
    profile is scaled rather than flattened.
    """

    term: str
    block: int = 0


@dataclass(frozen=True)
class KernelTarget:
    """One kernel parameter of a GP term; the basis is rebuilt on change."""

    term: str
    parameter: str
    factor: int | None = None


Target = ObsVarTarget | PriorVarTarget | KernelTarget


@dataclass(frozen=True)
class HyperEntry:
    """A named, positive hyperparameter with log-space bounds."""

    name: str
    target: Target
    lower: float
    upper: float
    grid: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not (0 < self.lower < self.upper and np.isfinite(self.upper)):
            raise SpecError(
                f"hyperparameter '{self.name}' needs 0 < lower < upper, "
                f"got ({self.lower}, {self.upper})"
            )
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    def default_grid(self, points: int) -> tuple[float, ...]:
        """Explicit grid if given, else ``points`` log-spaced values across the bounds."""
        if self.grid is not None:
            return self.grid
        return tuple(np.logspace(np.log10(self.lower), np.log10(self.upper), points))


@dataclass(frozen=True)
class HyperSpec:
    """Ordered set of tunable hyperparameters."""

    entries: tuple[HyperEntry, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        names = self.names
        if not names:
            raise SpecError("no hyperparameters to tune")
        if len(set(names)) != len(names):
            raise SpecError(f"hyperparameter names must be unique: {names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def entry(self, name: str) -> HyperEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise SpecError(f"unknown hyperparameter '{name}'")

    def check(self, values: Mapping[str, float]) -> None:
        """Every entry has a value inside its bounds."""
        for e in self.entries:
            if e.name not in values:
                raise SpecError(f"missing value for hyperparameter '{e.name}'")
            value = float(values[e.name])
            if not e.lower <= value <= e.upper:
                raise OutOfBounds(e.name, value, e.bounds)
        extra = set(values) - set(self.names)
        if extra:
            raise SpecError(f"unknown hyperparameters {sorted(extra)}")

    def vector(self, values: Mapping[str, float]) -> tuple[float, ...]:
        return tuple(float(values[name]) for name in self.names)


def _apply_prior_var(model: GamModel, target: PriorVarTarget, value: float) -> GamModel:
    term = model.term(target.term)
    if isinstance(term, LinearTerm):
        return model.replace_term(replace(term, prior_var=value))
    if not isinstance(term, LocalTerm):
        raise SpecError(f"term '{term.name}' has no tunable prior blocks")
    if not 0 <= target.block < len(term.priors):
        raise SpecError(f"term '{term.name}' has no prior block {target.block}")
    priors = list(term.priors)
    base = priors[target.block].var
    priors[target.block] = priors[target.block].with_var(value * base / base.max())
    return model.replace_term(term.with_priors(priors))


def _apply_kernel(model: GamModel, target: KernelTarget, value: float) -> GamModel:
    term = model.term(target.term)
    if not isinstance(term, GpTerm) or term.kernel is None:
        raise SpecError(f"term '{target.term}' has no kernel to tune")
    kernel = term.kernel.with_parameter(target.parameter, value, target.factor)
    return model.replace_term(term.with_kernel(kernel))


def apply_values(model: GamModel, spec: HyperSpec, values: Mapping[str, float]) -> GamModel:
    """Model with every hyperparameter in ``values`` substituted."""
    spec.check(values)
    tuned = model
    for e in spec.entries:
        value = float(values[e.name])
        if isinstance(e.target, ObsVarTarget):
            tuned = tuned.with_obs_var(value)
        elif isinstance(e.target, PriorVarTarget):
            tuned = _apply_prior_var(tuned, e.target, value)
        else:
            tuned = _apply_kernel(tuned, e.target, value)
    return tuned


def add_weak_priors(
    model: GamModel, variance: float, skip: Sequence[str] = ()
) -> GamModel:
    """Attach zero-mean identity priors to Local terms with no identifiability block."""
    tuned = model
    for term in model.terms:
        if not isinstance(term, LocalTerm) or term.name in skip:
            continue
        if _has_level_prior(term):
            continue
        weak = identifiability_prior(term.grid.size, PerTermMean(variance=variance))
        tuned = tuned.replace_term(term.with_priors([*term.priors, weak]))
    return tuned


def _has_level_prior(term: LocalTerm) -> bool:
    n = term.grid.size
    eye = sparse.eye_array(n, format="csr")
    for block in term.priors:
        if block.n_rows == n and abs(block.transform[:, :n] - eye).sum() == 0:
            return True
    return False
