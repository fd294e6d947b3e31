"""GP eigenbases and local (grid) bases for GAM terms."""

from .gp import GpBasis, build_basis, eigenbasis, gp_design_block, kron_eigenbasis
from .kernels import (
    Kernel,
    Periodic,
    Separable,
    SquaredExponential,
    Symmetric,
    covariance_matrix,
    kernel_eval,
)
from .local import (
    DifferenceOperator,
    PerTermMean,
    SharedMean,
    along_axis,
    difference_operator,
    identifiability_prior,
    interpolation_matrix,
    knot_profile,
    periodic_rows,
    spatial_std_profile,
    stencil,
    symmetry_rows,
)

__all__ = [
    "DifferenceOperator",
    "GpBasis",
    "Kernel",
    "PerTermMean",
    "Periodic",
    "Separable",
    "SharedMean",
    "SquaredExponential",
    "Symmetric",
    "along_axis",
    "build_basis",
    "covariance_matrix",
    "difference_operator",
    "eigenbasis",
    "gp_design_block",
    "identifiability_prior",
    "interpolation_matrix",
    "kernel_eval",
    "knot_profile",
    "kron_eigenbasis",
    "periodic_rows",
    "spatial_std_profile",
    "stencil",
    "symmetry_rows",
]
