"""Additive terms and the GAM model container."""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy import sparse

from ..basis.gp import GpBasis, MeanFn, build_basis, gp_design_block
from ..basis.kernels import Kernel, as_points
from ..basis.local import interpolation_matrix
from ..errors import InvalidSystem, MissingColumn, SpecError, UnknownTerm
from ..models import FloatArray, Grid, PriorBlock


def data_columns(data: pd.DataFrame, names: Sequence[str], term: str | None = None) -> FloatArray:
    """Numeric ``(n, len(names))`` block of ``data``."""
    for name in names:
        if name not in data.columns:
            raise MissingColumn(name, term)
    return data[list(names)].to_numpy(dtype=np.float64)


class GamTerm(ABC):
    """One additive component ``f(inputs)``, optionally times a multiplier column."""

    name: str
    multiplier: str | None

    @property
    @abstractmethod
    def inputs(self) -> tuple[str, ...]:
        """Data columns the term is a function of."""

    @property
    @abstractmethod
    def size(self) -> int:
        """Number of parameters."""

    @property
    @abstractmethod
    def kind(self) -> str:
        """Short kind label used in summaries and archives."""

    @abstractmethod
    def basis_rows(self, points: ArrayLike) -> tuple[sparse.csr_array, FloatArray]:
        """Rows and translation giving ``f`` at ``points`` (no multiplier)."""

    def prior(self) -> PriorBlock | None:
        """Prior rows over the term's own parameters."""
        return None

    def value_map(self) -> tuple[FloatArray, FloatArray] | None:
        """``(M, m)`` with knot values ``f = M theta + m``; None without a grid."""
        return None

    def design(self, data: pd.DataFrame) -> tuple[sparse.csr_array, FloatArray]:
        """Design block and translation for the rows of ``data``."""
        rows, shift = self.basis_rows(data_columns(data, self.inputs, self.name))
        if self.multiplier is None:
            return rows, shift
        scale = data_columns(data, [self.multiplier], self.name)[:, 0]
        return sparse.csr_array(sparse.diags_array(scale) @ rows), scale * shift


@dataclass(frozen=True, eq=False)
class LinearTerm(GamTerm):
    """``beta * x`` with an optional Gaussian prior on ``beta``."""

    name: str
    input: str
    multiplier: str | None = None
    prior_mean: float = 0.0
    prior_var: float | None = None

    @property
    def inputs(self) -> tuple[str, ...]:
        return (self.input,)

    @property
    def size(self) -> int:
        return 1

    @property
    def kind(self) -> str:
        return "linear"

    def basis_rows(self, points: ArrayLike) -> tuple[sparse.csr_array, FloatArray]:
        x = as_points(points)[:, :1]
        return sparse.csr_array(x), np.zeros(x.shape[0])

    def prior(self) -> PriorBlock | None:
        if self.prior_var is None:
            return None
        return PriorBlock(sparse.csr_array(np.ones((1, 1))), [self.prior_mean], [self.prior_var])


@dataclass(frozen=True, eq=False)
class GpTerm(GamTerm):
    """GP prior expressed through a truncated eigenbasis; parameters ~ N(0, I)."""

    name: str
    columns: tuple[str, ...]
    basis: GpBasis
    multiplier: str | None = None
    kernel: Kernel | None = None
    energy_threshold: float = 0.9999
    mean_fn: MeanFn | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        if len(self.columns) != self.basis.grid.ndim:
            raise SpecError(
                f"term '{self.name}' has {len(self.columns)} inputs for a "
                f"{self.basis.grid.ndim}-D grid"
            )

    @classmethod
    def build(
        cls,
        name: str,
        kernel: Kernel,
        grid: Grid,
        inputs: Sequence[str],
        *,
        energy_threshold: float = 0.9999,
        mean_fn: MeanFn | None = None,
        multiplier: str | None = None,
    ) -> GpTerm:
        basis = build_basis(kernel, grid, mean_fn, energy_threshold)
        return cls(name, tuple(inputs), basis, multiplier, kernel, energy_threshold, mean_fn)

    def with_kernel(self, kernel: Kernel) -> GpTerm:
        """Rebuild the basis for new kernel hyperparameters."""
        basis = build_basis(kernel, self.basis.grid, self.mean_fn, self.energy_threshold)
        return replace(self, basis=basis, kernel=kernel)

    @property
    def inputs(self) -> tuple[str, ...]:
        return self.columns

    @property
    def size(self) -> int:
        return self.basis.size

    @property
    def kind(self) -> str:
        return "gp"

    def basis_rows(self, points: ArrayLike) -> tuple[sparse.csr_array, FloatArray]:
        return gp_design_block(self.basis, points, self.name)

    def prior(self) -> PriorBlock | None:
        k = self.size
        return PriorBlock(sparse.eye_array(k, format="csr"), np.zeros(k), np.ones(k))

    def value_map(self) -> tuple[FloatArray, FloatArray] | None:
        return self.basis.basis, self.basis.mean


@dataclass(frozen=True, eq=False)
class LocalTerm(GamTerm):
    """Function values at grid knots with a stack of sparse priors.

    A shared-mean identifiability block adds one trailing parameter.
    """

    name: str
    columns: tuple[str, ...]
    grid: Grid
    priors: tuple[PriorBlock, ...] = ()
    multiplier: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "priors", tuple(self.priors))
        if len(self.columns) != self.grid.ndim:
            raise SpecError(
                f"term '{self.name}' has {len(self.columns)} inputs for a {self.grid.ndim}-D grid"
            )
        for block in self.priors:
            if block.n_columns not in (self.grid.size, self.grid.size + 1):
                raise InvalidSystem(
                    f"prior block of term '{self.name}' spans {block.n_columns} columns, "
                    f"grid has {self.grid.size} knots"
                )

    @property
    def inputs(self) -> tuple[str, ...]:
        return self.columns

    @property
    def extra(self) -> int:
        return int(any(block.n_columns == self.grid.size + 1 for block in self.priors))

    @property
    def size(self) -> int:
        return self.grid.size + self.extra

    @property
    def kind(self) -> str:
        return "local"

    def with_priors(self, priors: Sequence[PriorBlock]) -> LocalTerm:
        return replace(self, priors=tuple(priors))

    def basis_rows(self, points: ArrayLike) -> tuple[sparse.csr_array, FloatArray]:
        interp = interpolation_matrix(self.grid, points, self.name)
        if self.extra:
            interp = sparse.hstack([interp, sparse.csr_array((interp.shape[0], 1))], format="csr")
        return sparse.csr_array(interp), np.zeros(interp.shape[0])

    def prior(self) -> PriorBlock | None:
        if not self.priors:
            return None
        blocks = [block.padded(self.size) for block in self.priors]
        return PriorBlock(
            sparse.vstack([b.transform for b in blocks], format="csr"),
            np.concatenate([b.mean for b in blocks]),
            np.concatenate([b.var for b in blocks]),
        )

    def value_map(self) -> tuple[FloatArray, FloatArray] | None:
        M = np.eye(self.grid.size, self.size)
        return M, np.zeros(self.grid.size)


@dataclass(frozen=True, eq=False)
class GamModel:
    """Ordered additive terms, the response column and the noise variance.

    ``obs_var`` is either one variance for every row or the name of a data
    column holding per-row variances.
    """

    terms: tuple[GamTerm, ...]
    response: str = "y"
    obs_var: float | str = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise SpecError("a model needs at least one term")
        names = [t.name for t in self.terms]
        if len(set(names)) != len(names):
            raise SpecError(f"term names must be unique: {names}")
        if isinstance(self.obs_var, int | float) and not (
            np.isfinite(self.obs_var) and self.obs_var > 0
        ):
            raise InvalidSystem("observation variance must be finite and positive")

    @property
    def n_par(self) -> int:
        return sum(t.size for t in self.terms)

    def term(self, name: str) -> GamTerm:
        for t in self.terms:
            if t.name == name:
                return t
        raise UnknownTerm(name)

    def offsets(self) -> dict[str, tuple[int, int]]:
        """``name -> (start, stop)`` of each term's parameter slice."""
        result: dict[str, tuple[int, int]] = {}
        start = 0
        for t in self.terms:
            result[t.name] = (start, start + t.size)
            start += t.size
        return result

    def replace_term(self, term: GamTerm) -> GamModel:
        self.term(term.name)
        return replace(
            self, terms=tuple(term if t.name == term.name else t for t in self.terms)
        )

    def with_obs_var(self, obs_var: float | str) -> GamModel:
        return replace(self, obs_var=obs_var)
