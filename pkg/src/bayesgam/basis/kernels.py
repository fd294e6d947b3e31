"""Covariance kernels for GP terms."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from functools import reduce

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.distance import cdist

from ..errors import DimensionMismatch, NonPositiveStd, SpecError
from ..models import FloatArray, Grid


def as_points(x: ArrayLike) -> FloatArray:
    """Coerce to an ``(n, d)`` point array; a 1-D array is ``n`` scalar points."""
    points = np.asarray(x, dtype=np.float64)
    if points.ndim == 0:
        return points.reshape(1, 1)
    if points.ndim == 1:
        return points[:, None]
    return points


class Kernel(ABC):
    """Positive semi-definite covariance function."""

    @property
    def arity(self) -> int | None:
        """Input dimension the kernel requires, or None for any."""
        return None

    @abstractmethod
    def matrix(self, x: FloatArray, x2: FloatArray) -> FloatArray:
        """Cross-covariance of point arrays ``(n, d)`` and ``(m, d)``."""

    @abstractmethod
    def with_parameter(self, name: str, value: float, factor: int | None = None) -> Kernel:
        """Copy with one scalar hyperparameter replaced."""

    def __call__(self, x: ArrayLike, x2: ArrayLike) -> FloatArray:
        p, q = as_points(x), as_points(x2)
        if p.shape[1] != q.shape[1]:
            raise DimensionMismatch(f"points have dimensions {p.shape[1]} and {q.shape[1]}")
        if self.arity is not None and p.shape[1] != self.arity:
            raise DimensionMismatch(
                f"{type(self).__name__} takes {self.arity}-D points, got {p.shape[1]}-D"
            )
        return self.matrix(p, q)


def _positive(name: str, value: float) -> None:
    if not np.isfinite(value) or value <= 0:
        raise NonPositiveStd(f"kernel {name} must be positive, got {value!r}")


@dataclass(frozen=True)
class SquaredExponential(Kernel):
    """``variance * exp(-d^2 / (2 length^2))``."""

    variance: float
    length: float

    def __post_init__(self) -> None:
        _positive("variance", self.variance)
        _positive("length", self.length)

    def matrix(self, x: FloatArray, x2: FloatArray) -> FloatArray:
        d2 = cdist(x, x2, "sqeuclidean")
        return self.variance * np.exp(-d2 / (2.0 * self.length**2))

    def with_parameter(self, name: str, value: float, factor: int | None = None) -> Kernel:
        if name not in ("variance", "length"):
            raise SpecError(f"squared exponential kernel has no parameter '{name}'")
        return replace(self, **{name: value})


@dataclass(frozen=True)
class Periodic(Kernel):
    """``variance * exp(-2 sin^2(pi d / period) / length^2)``."""

    variance: float
    length: float
    period: float

    def __post_init__(self) -> None:
        _positive("variance", self.variance)
        _positive("length", self.length)
        _positive("period", self.period)

    def matrix(self, x: FloatArray, x2: FloatArray) -> FloatArray:
        d = cdist(x, x2, "euclidean")
        return self.variance * np.exp(-2.0 * np.sin(np.pi * d / self.period) ** 2 / self.length**2)

    def with_parameter(self, name: str, value: float, factor: int | None = None) -> Kernel:
        if name not in ("variance", "length", "period"):
            raise SpecError(f"periodic kernel has no parameter '{name}'")
        return replace(self, **{name: value})


@dataclass(frozen=True)
class Symmetric(Kernel):
    """``k(x, x') + k(-x, x')``: functions symmetric about the origin."""

    inner: Kernel

    @property
    def arity(self) -> int | None:
        return 1

    def matrix(self, x: FloatArray, x2: FloatArray) -> FloatArray:
        return self.inner.matrix(x, x2) + self.inner.matrix(-x, x2)

    def with_parameter(self, name: str, value: float, factor: int | None = None) -> Kernel:
        return Symmetric(self.inner.with_parameter(name, value, factor))


@dataclass(frozen=True)
class Separable(Kernel):
    """Product of 1-D kernels, one per input dimension."""

    factors: tuple[Kernel, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise DimensionMismatch("separable kernel needs at least one factor")
        for factor in self.factors:
            if factor.arity not in (None, 1) or isinstance(factor, Separable):
                raise DimensionMismatch("separable kernel factors must be 1-D kernels")

    @property
    def arity(self) -> int | None:
        return len(self.factors)

    def matrix(self, x: FloatArray, x2: FloatArray) -> FloatArray:
        blocks = (f.matrix(x[:, [i]], x2[:, [i]]) for i, f in enumerate(self.factors))
        return reduce(np.multiply, blocks)

    def with_parameter(self, name: str, value: float, factor: int | None = None) -> Kernel:
        if factor is None or not 0 <= factor < len(self.factors):
            raise SpecError(f"separable kernel parameter needs a factor index, got {factor!r}")
        factors = list(self.factors)
        factors[factor] = factors[factor].with_parameter(name, value)
        return Separable(tuple(factors))


def kernel_eval(kernel: Kernel, x: ArrayLike, x2: ArrayLike) -> float:
    """Covariance between two single points."""
    p = np.atleast_1d(np.asarray(x, dtype=np.float64)).reshape(1, -1)
    q = np.atleast_1d(np.asarray(x2, dtype=np.float64)).reshape(1, -1)
    return float(kernel(p, q)[0, 0])


def covariance_matrix(kernel: Kernel, grid: Grid) -> FloatArray:
    """Dense covariance of all grid knots in flattening order."""
    if grid.ndim != 1 and not isinstance(kernel, Separable):
        raise DimensionMismatch("multi-dimensional grids need a separable kernel")
    points = grid.points()
    K = kernel(points, points)
    return 0.5 * (K + K.T)
