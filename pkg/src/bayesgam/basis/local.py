"""Local basis: grid interpolation and sparse difference-type priors.

A local term stores its function values at the knots of a ``Grid``. Data
rows reach them through multilinear interpolation; smoothness, periodicity,
symmetry and identifiability are all Gaussian priors on linear combinations
of knot values, returned as ``PriorBlock`` rows.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy import sparse
from scipy.special import comb

from ..errors import (
    DimensionMismatch,
    NoMirrorPairs,
    NonPositiveStd,
    OrderTooHigh,
    OutOfGrid,
    UnsupportedPeriod,
)
from ..models import FloatArray, Grid, PriorBlock, as_vector
from .kernels import as_points

StdFn = Callable[[FloatArray], ArrayLike]

MIRROR_TOLERANCE = 1e-9


def interpolation_matrix(
    grid: Grid, inputs: ArrayLike, term: str | None = None
) -> sparse.csr_array:
    """Multilinear interpolation weights from knots to ``inputs``.

    Each row has at most ``2**ndim`` non-zeros summing to one; at a knot the
    row is a unit vector. Points outside the grid raise ``OutOfGrid``.
    """
    if np.size(inputs) == 0:
        return sparse.csr_array((0, grid.size))
    points = as_points(inputs)
    n, d = points.shape
    if d != grid.ndim:
        raise DimensionMismatch(f"inputs are {d}-D, grid is {grid.ndim}-D")

    outside = np.zeros(n, dtype=bool)
    cells, fracs = [], []
    for a, axis in enumerate(grid.axes):
        x = points[:, a]
        outside |= ~np.isfinite(x) | (x < axis[0]) | (x > axis[-1])
        cell = np.clip(np.searchsorted(axis, x, side="right") - 1, 0, axis.shape[0] - 2)
        cells.append(cell)
        fracs.append((x - axis[cell]) / (axis[cell + 1] - axis[cell]))
    if outside.any():
        first = int(np.flatnonzero(outside)[0])
        raise OutOfGrid(first, points[first].tolist(), term)

    strides = grid.strides
    rows, cols, vals = [], [], []
    row_ids = np.arange(n)
    for corner in itertools.product((0, 1), repeat=d):
        weight = np.ones(n)
        index = np.zeros(n, dtype=np.int64)
        for a, bit in enumerate(corner):
            weight *= fracs[a] if bit else 1.0 - fracs[a]
            index += (cells[a] + bit) * strides[a]
        rows.append(row_ids)
        cols.append(index)
        vals.append(weight)
    matrix = sparse.csr_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, grid.size),
    )
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    return matrix


def stencil(order: int) -> FloatArray:
    """Difference coefficients ``(-1)**(j+1) * C(order, j)``, j = 0..order."""
    return np.array(
        [(-1) ** (j + 1) * comb(order, j, exact=True) for j in range(order + 1)], dtype=np.float64
    )


def _banded(n: int, coefficients: FloatArray) -> sparse.csr_array:
    width = coefficients.shape[0]
    diagonals = [np.full(n - width + 1, c) for c in coefficients]
    return sparse.csr_array(
        sparse.diags_array(diagonals, offsets=list(range(width)), shape=(n - width + 1, n))
    )


def _lift(operator: sparse.sparray, grid: Grid, axis: int) -> sparse.csr_array:
    """Apply a 1-D operator along ``axis`` on every line of the grid."""
    factors = [
        operator if a == axis else sparse.eye_array(n, format="csr")
        for a, n in enumerate(grid.shape)
    ]
    lifted = factors[0]
    for factor in factors[1:]:
        lifted = sparse.kron(factor, lifted, format="csr")
    return sparse.csr_array(lifted)


def _lift_vector(values: FloatArray, grid: Grid, axis: int) -> FloatArray:
    parts = [values if a == axis else np.ones(n) for a, n in enumerate(grid.shape)]
    lifted = parts[0]
    for part in parts[1:]:
        lifted = np.kron(part, lifted)
    return lifted


def _check_axis(grid: Grid, axis: int) -> None:
    if not 0 <= axis < grid.ndim:
        raise DimensionMismatch(f"axis {axis} out of range for a {grid.ndim}-D grid")


def _row_positions(grid: Grid, axis: int, order: int) -> np.ndarray:
    """Stencil start index along ``axis`` for every row of a lifted operator."""
    shape = list(grid.shape)
    shape[axis] -= order
    flat = np.arange(int(np.prod(shape)))
    return np.unravel_index(flat, shape, order="F")[axis]


@dataclass(frozen=True, eq=False)
class DifferenceOperator:
    """Order-``order`` differences along one grid axis with their prior std."""

    order: int
    axis: int
    rows: sparse.csr_array
    prior_std: FloatArray

    def to_prior(self) -> PriorBlock:
        """Zero-mean Gaussian prior block on the differences."""
        return PriorBlock.from_std(self.rows, self.prior_std)


def difference_operator(
    grid: Grid, axis: int, order: int, prior_std: ArrayLike
) -> DifferenceOperator:
    """Rows of order-``order`` finite differences along ``axis``."""
    _check_axis(grid, axis)
    if order < 1:
        raise SpecError(f"difference order must be at least 1, got {order}")
    n = grid.shape[axis]
    if order >= n:
        raise OrderTooHigh(f"order {order} needs more than {n} knots on axis {axis}")
    rows = _lift(_banded(n, stencil(order)), grid, axis)
    std = as_vector(prior_std, rows.shape[0], "prior std")
    if not np.all(np.isfinite(std)) or np.any(std <= 0):
        raise NonPositiveStd("difference prior std must be finite and positive")
    return DifferenceOperator(order=order, axis=axis, rows=rows, prior_std=std)


def stencil_centres(axis_knots: ArrayLike, order: int) -> FloatArray:
    """Location of each order-``order`` stencil along one axis.

    Even orders have a central knot; odd orders use the midpoint of the two
    central knots.
    """
    knots = np.asarray(axis_knots, dtype=np.float64)
    starts = np.arange(knots.shape[0] - order)
    if order % 2 == 0:
        return knots[starts + order // 2]
    return 0.5 * (knots[starts + (order - 1) // 2] + knots[starts + (order + 1) // 2])


def spatial_std_profile(grid: Grid, axis: int, order: int, std_fn: StdFn) -> FloatArray:
    """Per-row prior std of a difference operator from a function of position."""
    _check_axis(grid, axis)
    if order >= grid.shape[axis]:
        raise OrderTooHigh(f"order {order} needs more than {grid.shape[axis]} knots")
    centres = stencil_centres(grid.axes[axis], order)
    values = np.asarray(std_fn(centres), dtype=np.float64).ravel()
    if values.shape != centres.shape:
        raise DimensionMismatch("std_fn must return one value per stencil centre")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise NonPositiveStd("std_fn returned a non-positive standard deviation")
    return values[_row_positions(grid, axis, order)]


def knot_profile(axis_knots: ArrayLike, values: ArrayLike) -> StdFn:
    """``std_fn`` interpolating per-knot standard deviations linearly."""
    knots = np.asarray(axis_knots, dtype=np.float64)
    profile = np.asarray(values, dtype=np.float64)
    if profile.shape != knots.shape:
        raise DimensionMismatch("std profile needs one value per knot")
    return lambda x: np.interp(x, knots, profile)


def periodic_rows(
    grid_axis: ArrayLike,
    match_derivatives: int,
    prior_std: ArrayLike,
    period: float | None = None,
) -> PriorBlock:
    """Rows tying the function at the two ends of a 1-D axis together.

    The first row is ``theta[-1] - theta[0]``; row ``k`` matches the k-th
    backward difference at the end with the k-th forward difference at the
    start. With a custom ``period`` equal to a whole number ``s`` of knot
    steps, value rows ``theta[i + s] - theta[i]`` are produced instead.
    """
    knots = np.asarray(grid_axis, dtype=np.float64).ravel()
    n = knots.shape[0]
    span = knots[-1] - knots[0]
    if period is not None and not np.isclose(period, span, rtol=0.0, atol=MIRROR_TOLERANCE):
        return _custom_period_rows(knots, period, prior_std)
    if match_derivatives < 0 or match_derivatives >= n - 1:
        raise OrderTooHigh(f"cannot match {match_derivatives} derivatives with {n} knots")
    rows = np.zeros((match_derivatives + 1, n))
    rows[0, 0], rows[0, -1] = -1.0, 1.0
    for k in range(1, match_derivatives + 1):
        forward = np.array(
            [(-1) ** (k - j) * comb(k, j, exact=True) for j in range(k + 1)], dtype=np.float64
        )
        rows[k, n - k - 1 :] += forward
        rows[k, : k + 1] -= forward
    return PriorBlock.from_std(sparse.csr_array(rows), prior_std)


def _custom_period_rows(knots: FloatArray, period: float, prior_std: ArrayLike) -> PriorBlock:
    steps = np.diff(knots)
    if not np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
        raise UnsupportedPeriod("custom periods need an equispaced axis")
    shift = period / steps[0]
    s = int(round(shift))
    if s < 1 or s >= knots.shape[0] or abs(shift - s) > 1e-9:
        raise UnsupportedPeriod(f"period {period} is not a whole number of knot steps")
    n_rows = knots.shape[0] - s
    starts = np.arange(n_rows)
    rows = sparse.csr_array(
        (
            np.concatenate([-np.ones(n_rows), np.ones(n_rows)]),
            (np.concatenate([starts, starts]), np.concatenate([starts, starts + s])),
        ),
        shape=(n_rows, knots.shape[0]),
    )
    return PriorBlock.from_std(rows, prior_std)


def symmetry_rows(
    grid_axis: ArrayLike, axis_of_symmetry: float, prior_std: ArrayLike
) -> PriorBlock:
    """Rows ``theta[j] - theta[i]`` for knots mirrored about ``axis_of_symmetry``.

    Pairs are listed from the symmetry axis outwards.
    """
    knots = np.asarray(grid_axis, dtype=np.float64).ravel()
    left = np.flatnonzero(knots < axis_of_symmetry - MIRROR_TOLERANCE)[::-1]
    pairs = []
    for i in left:
        mirror = 2.0 * axis_of_symmetry - knots[i]
        j = int(np.argmin(np.abs(knots - mirror)))
        if abs(knots[j] - mirror) <= MIRROR_TOLERANCE:
            pairs.append((int(i), j))
    if not pairs:
        raise NoMirrorPairs(f"no knots mirror each other about {axis_of_symmetry}")
    rows = np.zeros((len(pairs), knots.shape[0]))
    for r, (i, j) in enumerate(pairs):
        rows[r, i], rows[r, j] = -1.0, 1.0
    return PriorBlock.from_std(sparse.csr_array(rows), prior_std)


def along_axis(block: PriorBlock, grid: Grid, axis: int) -> PriorBlock:
    """Lift 1-D prior rows onto every line of ``grid`` along ``axis``."""
    _check_axis(grid, axis)
    if block.n_columns != grid.shape[axis]:
        raise DimensionMismatch(
            f"block spans {block.n_columns} knots, axis {axis} has {grid.shape[axis]}"
        )
    if grid.ndim == 1:
        return block
    return PriorBlock(
        _lift(block.transform, grid, axis),
        _lift_vector(block.mean, grid, axis),
        _lift_vector(block.var, grid, axis),
    )


@dataclass(frozen=True)
class PerTermMean:
    """Each knot value ~ N(mean, variance)."""

    variance: float
    mean: float = 0.0


@dataclass(frozen=True)
class SharedMean:
    """Knot values ~ N(m, variance) around one extra shared-mean parameter m."""

    variance: float


def identifiability_prior(term_size: int, mode: PerTermMean | SharedMean) -> PriorBlock:
    """Prior that pins the level of an additive term.

    The shared-mean block has ``term_size + 1`` columns; the last column is
    the shared mean parameter.
    """
    if term_size < 1:
        raise SpecError("term size must be positive")
    if not np.isfinite(mode.variance) or mode.variance <= 0:
        raise NonPositiveStd("identifiability variance must be finite and positive")
    eye = sparse.eye_array(term_size, format="csr")
    if isinstance(mode, PerTermMean):
        return PriorBlock(eye, np.full(term_size, mode.mean), np.full(term_size, mode.variance))
    transform = sparse.hstack([eye, sparse.csr_array(-np.ones((term_size, 1)))], format="csr")
    return PriorBlock(transform, np.zeros(term_size), np.full(term_size, mode.variance))
