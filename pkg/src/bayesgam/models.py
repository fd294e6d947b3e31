"""Core data models for Bayes GAM."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import sparse

from .errors import InvalidSystem, NonPositiveStd

FloatArray = NDArray[np.float64]


class Direction(Enum):
    """Direction of a monotonicity constraint."""

    INCREASING = "increasing"
    DECREASING = "decreasing"


class Objective(Enum):
    """Hyperparameter selection criteria."""

    MAP = "map"
    EVIDENCE = "evidence"
    CV = "cv"


def as_csr(matrix: Any) -> sparse.csr_array:
    """Coerce a dense or sparse 2-D operand to a float CSR array."""
    if sparse.issparse(matrix):
        return sparse.csr_array(matrix, dtype=np.float64)
    dense = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    return sparse.csr_array(dense)


def as_vector(values: ArrayLike, length: int | None = None, name: str = "vector") -> FloatArray:
    """Coerce ``values`` to a 1-D float array, broadcasting scalars to ``length``."""
    array = np.asarray(values, dtype=np.float64)
    if array.ndim == 0:
        if length is None:
            return array.reshape(1)
        return np.full(length, float(array))
    array = array.ravel()
    if length is not None and array.shape[0] != length:
        raise InvalidSystem(f"{name} has length {array.shape[0]}, expected {length}")
    return array


@dataclass(frozen=True, eq=False)
class Grid:
    """Tensor-product grid of knots.

    Flattening is column-major: axis 0 varies fastest, so the knot with
    per-axis indices (i0, i1, ...) sits at ``i0 + n0 * i1 + n0 * n1 * i2 ...``.
    """

    axes: tuple[FloatArray, ...]

    def __post_init__(self) -> None:
        axes = tuple(np.asarray(axis, dtype=np.float64).ravel() for axis in self.axes)
        if not axes:
            raise InvalidSystem("grid needs at least one axis")
        for index, axis in enumerate(axes):
            if axis.shape[0] < 2:
                raise InvalidSystem(f"grid axis {index} needs at least two knots")
            if not np.all(np.isfinite(axis)) or np.any(np.diff(axis) <= 0):
                raise InvalidSystem(f"grid axis {index} must be finite and strictly increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def linspace(cls, *ranges: tuple[float, float, int]) -> Grid:
        """Build an equispaced grid from ``(start, stop, num)`` per axis."""
        return cls(tuple(np.linspace(lo, hi, int(num)) for lo, hi, num in ranges))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(axis.shape[0] for axis in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def strides(self) -> tuple[int, ...]:
        return tuple(int(np.prod(self.shape[:a])) for a in range(self.ndim))

    def points(self) -> FloatArray:
        """All knots as a ``(size, ndim)`` array in flattening order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([m.ravel(order="F") for m in mesh])

    def refined(self, resolution: int) -> Grid:
        """Equispaced grid over the same bounding box; 0 keeps the knots."""
        if resolution <= 0:
            return self
        return Grid(tuple(np.linspace(a[0], a[-1], resolution) for a in self.axes))

    def __repr__(self) -> str:
        return f"Grid(shape={self.shape})"


@dataclass(frozen=True, eq=False)
class PriorBlock:
    """Gaussian prior rows ``transform @ theta ~ N(mean, diag(var))``."""

    transform: sparse.csr_array
    mean: FloatArray
    var: FloatArray

    def __post_init__(self) -> None:
        transform = as_csr(self.transform)
        rows = transform.shape[0]
        mean = as_vector(self.mean, rows, "prior mean")
        var = as_vector(self.var, rows, "prior variance")
        if not np.all(np.isfinite(var)) or np.any(var <= 0):
            raise NonPositiveStd("prior variances must be finite and positive")
        object.__setattr__(self, "transform", transform)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @classmethod
    def from_std(
        cls, transform: Any, std: ArrayLike, mean: ArrayLike | None = None
    ) -> PriorBlock:
        """Build a block from standard deviations (scalar or per row)."""
        transform = as_csr(transform)
        rows = transform.shape[0]
        std_vec = as_vector(std, rows, "prior std")
        if not np.all(np.isfinite(std_vec)) or np.any(std_vec <= 0):
            raise NonPositiveStd("prior standard deviations must be finite and positive")
        mean_vec = np.zeros(rows) if mean is None else as_vector(mean, rows, "prior mean")
        return cls(transform, mean_vec, std_vec**2)

    @property
    def n_rows(self) -> int:
        return int(self.transform.shape[0])

    @property
    def n_columns(self) -> int:
        return int(self.transform.shape[1])

    def padded(self, n_columns: int) -> PriorBlock:
        """Append zero columns so the block spans ``n_columns`` parameters."""
        extra = n_columns - self.n_columns
        if extra < 0:
            raise InvalidSystem("cannot pad a prior block to fewer columns")
        if extra == 0:
            return self
        zeros = sparse.csr_array((self.n_rows, extra))
        return PriorBlock(sparse.hstack([self.transform, zeros], format="csr"), self.mean, self.var)

    def with_var(self, var: ArrayLike) -> PriorBlock:
        return PriorBlock(self.transform, self.mean, as_vector(var, self.n_rows, "prior variance"))


@dataclass(frozen=True, eq=False)
class LinearGaussianSystem:
    """Observation and prior equations of a linear-Gaussian model.

    ``y = A theta + e`` with ``e ~ N(0, diag(obs_var))`` and
    ``B theta ~ N(prior_mean, diag(prior_var))``. ``B`` may be rank
    deficient as long as the posterior is proper.
    """

    design: sparse.csr_array
    obs: FloatArray
    obs_var: FloatArray
    prior_transform: sparse.csr_array
    prior_mean: FloatArray
    prior_var: FloatArray

    def __post_init__(self) -> None:
        design = as_csr(self.design)
        n_obs, n_par = design.shape
        prior = self.prior_transform
        prior = sparse.csr_array((0, n_par)) if prior is None else as_csr(prior)
        if prior.shape[1] != n_par:
            raise InvalidSystem(
                f"prior transform has {prior.shape[1]} columns, design has {n_par}"
            )
        n_prior = prior.shape[0]
        obs = as_vector(self.obs, n_obs, "observations")
        obs_var = as_vector(self.obs_var, n_obs, "observation variances")
        prior_mean = as_vector(self.prior_mean, n_prior, "prior mean") if n_prior else np.zeros(0)
        prior_var = (
            as_vector(self.prior_var, n_prior, "prior variances") if n_prior else np.zeros(0)
        )
        if not np.all(np.isfinite(obs)):
            raise InvalidSystem("observations must be finite")
        if np.any(~np.isfinite(obs_var)) or np.any(obs_var <= 0):
            raise InvalidSystem("observation variances must be finite and positive")
        if np.any(~np.isfinite(prior_var)) or np.any(prior_var <= 0):
            raise InvalidSystem("prior variances must be finite and positive")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "obs_var", obs_var)
        object.__setattr__(self, "prior_transform", prior)
        object.__setattr__(self, "prior_mean", prior_mean)
        object.__setattr__(self, "prior_var", prior_var)

    @property
    def n_obs(self) -> int:
        return int(self.design.shape[0])

    @property
    def n_par(self) -> int:
        return int(self.design.shape[1])

    @property
    def n_prior(self) -> int:
        return int(self.prior_transform.shape[0])


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Linear constraints ``matrix @ theta >= bound``; flagged rows are equalities."""

    matrix: sparse.csr_array
    bound: FloatArray
    equality: NDArray[np.bool_]

    def __post_init__(self) -> None:
        matrix = as_csr(self.matrix)
        rows = matrix.shape[0]
        bound = as_vector(self.bound, rows, "constraint bound") if rows else np.zeros(0)
        equality = np.asarray(self.equality, dtype=bool).ravel()
        if equality.size == 1 and rows != 1:
            equality = np.full(rows, bool(equality[0]))
        if equality.shape[0] != rows:
            raise InvalidSystem("equality mask length differs from the constraint count")
        if rows and np.any(np.abs(matrix).sum(axis=1) == 0):
            raise InvalidSystem("constraint matrix has an all-zero row")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "bound", bound)
        object.__setattr__(self, "equality", equality)

    @classmethod
    def empty(cls, n_columns: int) -> ConstraintSet:
        return cls(sparse.csr_array((0, n_columns)), np.zeros(0), np.zeros(0, dtype=bool))

    @classmethod
    def stack(cls, sets: Sequence[ConstraintSet]) -> ConstraintSet:
        """Concatenate constraint sets over the same parameter vector."""
        if not sets:
            raise InvalidSystem("nothing to stack")
        widths = {s.n_columns for s in sets}
        if len(widths) != 1:
            raise InvalidSystem(f"constraint sets have different widths: {sorted(widths)}")
        return cls(
            sparse.vstack([s.matrix for s in sets], format="csr"),
            np.concatenate([s.bound for s in sets]),
            np.concatenate([s.equality for s in sets]),
        )

    @property
    def n_rows(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def n_columns(self) -> int:
        return int(self.matrix.shape[1])

    def residual(self, theta: FloatArray) -> FloatArray:
        """``matrix @ theta - bound``; non-negative entries are satisfied."""
        return np.asarray(self.matrix @ theta) - self.bound
