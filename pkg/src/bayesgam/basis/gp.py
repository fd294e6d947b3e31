"""Truncated eigenbasis of a GP prior discretized on a grid.

A GP ``f ~ GP(m, k)`` on the knots of a grid is ``f = mu + P z`` with
``z ~ N(0, I)`` and ``P`` the scaled leading eigenvectors of the kernel
matrix. Keeping only the leading columns turns the GP into a few
parameters with an identity prior.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import reduce

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg, sparse

from ..errors import DimensionMismatch, IndefiniteCovariance, InvalidSystem, SpecError
from ..models import FloatArray, Grid
from .kernels import Kernel, Separable, covariance_matrix
from .local import interpolation_matrix

logger = logging.getLogger(__name__)

MeanFn = Callable[[FloatArray], ArrayLike]

NEGATIVE_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class GpBasis:
    """Leading eigen-directions of a discretized GP prior."""

    grid: Grid
    mean: FloatArray  # prior mean at the knots
    basis: FloatArray  # (n_knots, k), columns sqrt(lambda_i) q_i
    eigenvalues: FloatArray  # retained, descending
    energy: float  # retained fraction of the trace

    @property
    def size(self) -> int:
        return int(self.basis.shape[1])

    def covariance(self) -> FloatArray:
        """Covariance ``P P'`` represented by the retained columns."""
        return self.basis @ self.basis.T

    def sample_prior(self, count: int, rng: np.random.Generator | int | None = None) -> FloatArray:
        """Prior draws ``mu + P z`` at the knots, shape ``(count, n_knots)``."""
        generator = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        z = generator.standard_normal((self.size, count))
        return (self.mean[:, None] + self.basis @ z).T


def _spectrum(K: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Descending eigenpairs with clamped round-off negatives and fixed signs."""
    values, vectors = linalg.eigh(K)
    values, vectors = values[::-1], vectors[:, ::-1]
    tolerance = NEGATIVE_TOLERANCE * max(float(np.trace(K)), np.finfo(float).tiny)
    if values[-1] < -tolerance:
        raise IndefiniteCovariance(float(values[-1]), tolerance)
    if values[-1] < 0:
        logger.debug("clamping %d round-off negative eigenvalues", int(np.sum(values < 0)))
    values = np.clip(values, 0.0, None)
    # Largest-magnitude entry of every eigenvector is positive.
    lead = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return values, vectors * signs


def _retained(values: FloatArray, energy_threshold: float) -> int:
    if not 0.0 < energy_threshold <= 1.0:
        raise SpecError(f"energy threshold must lie in (0, 1], got {energy_threshold}")
    positive = int(np.count_nonzero(values > 0))
    if positive == 0:
        raise InvalidSystem("kernel matrix has no positive eigenvalue")
    if energy_threshold >= 1.0:
        return positive
    fraction = np.cumsum(values) / np.sum(values)
    k = int(np.searchsorted(fraction, energy_threshold, side="left")) + 1
    return min(k, positive)


def _grid_mean(grid: Grid, mean_fn: MeanFn | None) -> FloatArray:
    if mean_fn is None:
        return np.zeros(grid.size)
    mean = np.asarray(mean_fn(grid.points()), dtype=np.float64)
    return np.broadcast_to(mean, (grid.size,)).copy()


def eigenbasis(
    kernel: Kernel,
    grid: Grid,
    mean_fn: MeanFn | None = None,
    energy_threshold: float = 0.9999,
) -> GpBasis:
    """Smallest eigenbasis capturing ``energy_threshold`` of the prior variance."""
    values, vectors = _spectrum(covariance_matrix(kernel, grid))
    k = _retained(values, energy_threshold)
    energy = float(np.sum(values[:k]) / np.sum(values))
    logger.info("GP basis keeps %d of %d eigenvectors (energy %.6f)", k, grid.size, energy)
    return GpBasis(
        grid=grid,
        mean=_grid_mean(grid, mean_fn),
        basis=vectors[:, :k] * np.sqrt(values[:k]),
        eigenvalues=values[:k].copy(),
        energy=energy,
    )


def kron_eigenbasis(
    factors: Sequence[tuple[Kernel, ArrayLike]],
    mean_fn: MeanFn | None = None,
    energy_threshold: float = 0.9999,
) -> GpBasis:
    """Eigenbasis of a separable kernel on a tensor grid from its 1-D factors.

    Factors are ``(kernel, knots)`` in grid-axis order. Basis rows follow the
    grid flattening (first factor fastest), so the joint covariance is
    ``K_last kron ... kron K_first``; it is never formed.
    """
    if not factors:
        raise DimensionMismatch("need at least one factor")
    grid = Grid(tuple(np.asarray(knots, dtype=np.float64) for _, knots in factors))
    spectra = []
    for kernel, knots in factors:
        points = np.asarray(knots, dtype=np.float64)
        K = kernel(points, points)
        spectra.append(_spectrum(0.5 * (K + K.T)))

    joint = reduce(lambda acc, part: np.kron(part, acc), (values for values, _ in spectra))
    order = np.argsort(-joint, kind="stable")
    ranked = joint[order]
    k = _retained(ranked, energy_threshold)

    indices = np.unravel_index(order[:k], grid.shape, order="F")
    columns = np.empty((grid.size, k))
    for c in range(k):
        vectors = (spectra[a][1][:, indices[a][c]] for a in range(len(spectra)))
        columns[:, c] = reduce(lambda acc, part: np.kron(part, acc), vectors)
    energy = float(np.sum(ranked[:k]) / np.sum(ranked))
    logger.info(
        "Kronecker GP basis keeps %d of %d eigenvectors (energy %.6f)", k, grid.size, energy
    )
    return GpBasis(
        grid=grid,
        mean=_grid_mean(grid, mean_fn),
        basis=columns * np.sqrt(ranked[:k]),
        eigenvalues=ranked[:k].copy(),
        energy=energy,
    )


def build_basis(
    kernel: Kernel,
    grid: Grid,
    mean_fn: MeanFn | None = None,
    energy_threshold: float = 0.9999,
) -> GpBasis:
    """Pick the Kronecker route for separable kernels on multi-axis grids."""
    if isinstance(kernel, Separable) and grid.ndim > 1:
        if len(kernel.factors) != grid.ndim:
            raise DimensionMismatch(
                f"kernel has {len(kernel.factors)} factors, grid has {grid.ndim} axes"
            )
        factors = list(zip(kernel.factors, grid.axes, strict=True))
        return kron_eigenbasis(factors, mean_fn, energy_threshold)
    return eigenbasis(kernel, grid, mean_fn, energy_threshold)


def gp_design_block(
    basis: GpBasis, inputs: ArrayLike, term: str | None = None
) -> tuple[sparse.csr_array, FloatArray]:
    """Design rows ``Interp @ P`` and translation ``Interp @ mu`` for ``inputs``."""
    interp = interpolation_matrix(basis.grid, inputs, term)
    block = sparse.csr_array(np.asarray(interp @ basis.basis))
    return block, np.asarray(interp @ basis.mean)
