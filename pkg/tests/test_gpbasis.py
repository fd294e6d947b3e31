"""Tests for kernels and truncated GP eigenbases."""

import numpy as np
import pytest
from scipy import linalg

from bayesgam.basis import (
    Kernel,
    Periodic,
    Separable,
    SquaredExponential,
    Symmetric,
    build_basis,
    covariance_matrix,
    eigenbasis,
    gp_design_block,
    kernel_eval,
    kron_eigenbasis,
)
from bayesgam.errors import DimensionMismatch, IndefiniteCovariance, NonPositiveStd
from bayesgam.models import Grid


class _NegativeDistance(Kernel):
    """Not a covariance: -|x - x'|."""

    def matrix(self, x, x2):
        return -np.abs(x - x2.T)

    def with_parameter(self, name, value, factor=None):
        return self


def _oracle_k(K: np.ndarray, threshold: float) -> int:
    values = np.clip(np.sort(linalg.eigvalsh(K))[::-1], 0.0, None)
    fraction = np.cumsum(values) / values.sum()
    return int(np.argmax(fraction >= threshold)) + 1


class TestKernels:
    """Scalar kernel evaluations."""

    def test_squared_exponential_diagonal(self):
        """k(x, x) is the variance."""
        assert kernel_eval(SquaredExponential(4.0, 1.0), 0.3, 0.3) == pytest.approx(4.0)

    def test_periodic_full_period(self):
        """A full period apart the sine term vanishes."""
        assert kernel_eval(Periodic(1.0, 1.0, 2.0), 0.0, 2.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("shift", [1, 2, -3])
    def test_periodic_shift_invariance(self, shift):
        """Shifting one argument by whole periods leaves the value unchanged."""
        kernel = Periodic(2.0, 0.7, 1.5)
        base = kernel_eval(kernel, 0.2, 0.9)
        assert kernel_eval(kernel, 0.2, 0.9 + shift * 1.5) == pytest.approx(base, rel=1e-12)

    def test_symmetric_mirror(self):
        """k(1, -1) = exp(-2) + exp(0) for a unit squared exponential."""
        kernel = Symmetric(SquaredExponential(1.0, 1.0))
        assert kernel_eval(kernel, 1.0, -1.0) == pytest.approx(1.0 + np.exp(-2.0))

    def test_arguments_commute(self):
        """Stationary kernels are symmetric in their arguments."""
        for kernel in (SquaredExponential(1.5, 0.4), Periodic(1.0, 0.8, 3.0)):
            assert kernel_eval(kernel, 0.1, 1.7) == pytest.approx(kernel_eval(kernel, 1.7, 0.1))

    def test_separable_product(self):
        """A separable kernel multiplies its factors."""
        a, b = SquaredExponential(2.0, 1.0), Periodic(1.0, 1.0, 4.0)
        value = kernel_eval(Separable((a, b)), [0.0, 0.5], [1.0, 2.0])
        assert value == pytest.approx(kernel_eval(a, 0.0, 1.0) * kernel_eval(b, 0.5, 2.0))

    def test_dimension_mismatch(self):
        """A symmetric kernel is 1-D only."""
        with pytest.raises(DimensionMismatch):
            kernel_eval(Symmetric(SquaredExponential(1.0, 1.0)), [0.0, 1.0], [1.0, 0.0])

    def test_nonpositive_parameter(self):
        """Length scales must be positive."""
        with pytest.raises(NonPositiveStd):
            SquaredExponential(1.0, 0.0)

    def test_with_parameter(self):
        """Separable parameters are addressed by factor index."""
        kernel = Separable((SquaredExponential(1.0, 1.0), SquaredExponential(1.0, 2.0)))
        updated = kernel.with_parameter("length", 0.5, factor=1)
        assert updated.factors[1].length == 0.5
        assert updated.factors[0] == kernel.factors[0]


class TestCovarianceMatrix:
    """Dense kernel matrices on grids."""

    def test_diagonal_is_variance(self):
        """Every diagonal entry is the kernel variance."""
        K = covariance_matrix(SquaredExponential(3.0, 1.0), Grid(([0.0, 5.0],)))
        np.testing.assert_allclose(np.diag(K), 3.0)

    def test_corner_entry(self):
        """K[0, 2] = variance * exp(-(2h)^2 / (2 L^2)) on three equispaced knots."""
        K = covariance_matrix(SquaredExponential(2.0, 0.5), Grid(([0.0, 0.25, 0.5],)))
        assert K[0, 2] == pytest.approx(2.0 * np.exp(-(0.5**2) / (2 * 0.25)))
        np.testing.assert_array_equal(K, K.T)

    def test_numerically_psd(self):
        """50 knots: smallest eigenvalue above -1e-10 trace."""
        K = covariance_matrix(SquaredExponential(1.0, 0.3), Grid((np.linspace(0, 3, 50),)))
        assert linalg.eigvalsh(K).min() >= -1e-10 * np.trace(K)

    def test_multi_axis_needs_separable(self):
        """A 2-D grid with a 1-D kernel is rejected."""
        grid = Grid((np.arange(3.0), np.arange(2.0)))
        with pytest.raises(DimensionMismatch):
            covariance_matrix(Symmetric(SquaredExponential(1.0, 1.0)), grid)


class TestEigenbasis:
    """Truncated eigenbases of 1-D kernels."""

    def test_threshold_one_keeps_all(self):
        """Threshold 1 on a well-conditioned kernel keeps every knot."""
        grid = Grid((np.arange(10.0),))
        basis = eigenbasis(SquaredExponential(1.0, 0.3), grid, energy_threshold=1.0)
        assert basis.size == 10
        assert basis.energy == pytest.approx(1.0)

    @pytest.mark.parametrize("threshold", [0.5, 0.9, 0.9999])
    def test_constant_kernel_rank_one(self, threshold):
        """An effectively constant kernel needs one column."""
        grid = Grid((np.linspace(0, 1, 12),))
        basis = eigenbasis(SquaredExponential(2.0, 1e6), grid, None, threshold)
        assert basis.size == 1
        np.testing.assert_allclose(basis.eigenvalues, [24.0], rtol=1e-9)

    def test_truncation_matches_dense_oracle(self):
        """100 knots at 0.9999 keep exactly the dense-eigensolver count."""
        grid = Grid((np.linspace(0.0, 4.0, 100),))
        kernel = SquaredExponential(1.0, 2.0)
        basis = eigenbasis(kernel, grid, energy_threshold=0.9999)
        assert basis.size == _oracle_k(covariance_matrix(kernel, grid), 0.9999)
        assert basis.size < 20
        assert basis.energy >= 0.9999

    def test_columns_orthogonal(self):
        """P'P is diagonal with the eigenvalues."""
        basis = eigenbasis(SquaredExponential(1.0, 0.5), Grid((np.linspace(0, 3, 40),)))
        gram = basis.basis.T @ basis.basis
        np.testing.assert_allclose(gram, np.diag(basis.eigenvalues), atol=1e-8)
        assert np.all(np.diff(basis.eigenvalues) <= 0)

    @pytest.mark.parametrize("threshold", [0.9, 0.99, 0.9999])
    def test_reconstruction_bound(self, threshold):
        """||P P' - K||_F / ||K||_F stays below sqrt(1 - energy)."""
        grid = Grid((np.linspace(-2, 2, 60),))
        kernel = SquaredExponential(1.5, 0.6)
        K = covariance_matrix(kernel, grid)
        basis = eigenbasis(kernel, grid, energy_threshold=threshold)
        error = np.linalg.norm(basis.covariance() - K) / np.linalg.norm(K)
        assert error <= np.sqrt(1.0 - basis.energy) + 1e-12

    def test_mean_function(self):
        """The mean is the mean function at the knots."""
        grid = Grid((np.linspace(0, 1, 5),))
        basis = eigenbasis(SquaredExponential(1.0, 1.0), grid, lambda p: 2.0 * p[:, 0])
        np.testing.assert_allclose(basis.mean, 2.0 * grid.axes[0])

    def test_indefinite_rejected(self):
        """A matrix with a large negative eigenvalue is not a covariance."""
        with pytest.raises(IndefiniteCovariance):
            eigenbasis(_NegativeDistance(), Grid((np.linspace(0, 1, 6),)))

    def test_invalid_threshold(self):
        """Thresholds lie in (0, 1]."""
        with pytest.raises(ValueError):
            eigenbasis(SquaredExponential(1.0, 1.0), Grid((np.arange(4.0),)), energy_threshold=0.0)

    def test_signs_fixed(self):
        """The largest entry of every column is positive."""
        basis = eigenbasis(SquaredExponential(1.0, 0.5), Grid((np.linspace(0, 3, 30),)))
        lead = np.argmax(np.abs(basis.basis), axis=0)
        assert np.all(basis.basis[lead, np.arange(basis.size)] > 0)

    def test_prior_samples_match_variance(self):
        """10^5 draws reproduce diag(K) within 10 %."""
        grid = Grid((np.linspace(0, 2, 15),))
        kernel = SquaredExponential(2.0, 0.5)
        basis = eigenbasis(kernel, grid, energy_threshold=0.9999)
        draws = basis.sample_prior(100_000, 5)
        expected = np.diag(covariance_matrix(kernel, grid))
        np.testing.assert_allclose(draws.var(axis=0), expected, rtol=0.1)

    def test_symmetric_kernel_samples_are_even(self):
        """Draws from a symmetric kernel satisfy f(x) = f(-x)."""
        grid = Grid((np.linspace(-2, 2, 21),))
        basis = eigenbasis(Symmetric(SquaredExponential(1.0, 1.0)), grid)
        draws = basis.sample_prior(20, 3)
        np.testing.assert_allclose(draws, draws[:, ::-1], atol=1e-6 * np.abs(draws).max())


class TestKronEigenbasis:
    """Separable bases assembled from per-axis factors."""

    def test_identity_factors(self):
        """Independent knots give all-one joint eigenvalues."""
        white = SquaredExponential(1.0, 1e-3)
        factors = [(white, np.arange(3.0)), (white, np.arange(4.0))]
        basis = kron_eigenbasis(factors, energy_threshold=1.0)
        np.testing.assert_allclose(basis.eigenvalues, 1.0, rtol=1e-12)
        assert basis.size == 12

    def test_reproduces_dense_kronecker(self):
        """5 x 4 grid at threshold 1: P P' equals K2 kron K1."""
        k1, k2 = SquaredExponential(1.0, 0.8), SquaredExponential(2.0, 1.3)
        x1, x2 = np.linspace(0, 2, 5), np.linspace(-1, 1, 4)
        basis = kron_eigenbasis([(k1, x1), (k2, x2)], energy_threshold=1.0)
        K = np.kron(k2(x2, x2), k1(x1, x1))
        np.testing.assert_allclose(basis.covariance(), K, atol=1e-10)
        dense = covariance_matrix(Separable((k1, k2)), basis.grid)
        np.testing.assert_allclose(basis.covariance(), dense, atol=1e-10)

    def test_matches_dense_eigenvalues(self):
        """Joint eigenvalues equal those of the dense product kernel."""
        k1, k2 = SquaredExponential(1.0, 0.5), Periodic(1.0, 1.0, 2.0)
        x1, x2 = np.linspace(0, 1, 6), np.linspace(0, 1.5, 4)
        basis = kron_eigenbasis([(k1, x1), (k2, x2)], energy_threshold=1.0)
        dense = np.sort(linalg.eigvalsh(np.kron(k2(x2, x2), k1(x1, x1))))[::-1]
        np.testing.assert_allclose(basis.eigenvalues, dense[: basis.size], atol=1e-10)

    def test_truncation_matches_oracle(self):
        """Smooth factors at 0.9999 keep the dense-oracle count, well below 20."""
        k1, k2 = SquaredExponential(1.0, 2.0), SquaredExponential(1.0, 3.0)
        x1, x2 = np.linspace(0, 1, 5), np.linspace(0, 1, 4)
        basis = kron_eigenbasis([(k1, x1), (k2, x2)], energy_threshold=0.9999)
        K = np.kron(k2(x2, x2), k1(x1, x1))
        assert basis.size == _oracle_k(K, 0.9999)
        assert basis.size < 20

    def test_build_basis_routes_separable(self):
        """build_basis uses the Kronecker route on multi-axis grids."""
        grid = Grid((np.linspace(0, 1, 5), np.linspace(0, 1, 4)))
        kernel = Separable((SquaredExponential(1.0, 0.5), SquaredExponential(1.0, 0.5)))
        basis = build_basis(kernel, grid, energy_threshold=1.0)
        np.testing.assert_allclose(basis.covariance(), covariance_matrix(kernel, grid), atol=1e-10)


class TestDesignBlock:
    """Interpolated GP design rows."""

    @pytest.fixture
    def basis(self):
        grid = Grid((np.linspace(0, 1, 6),))
        return eigenbasis(SquaredExponential(1.0, 0.4), grid, lambda p: p[:, 0] ** 2)

    def test_knots_pick_rows(self, basis):
        """Inputs at knots select rows of P and entries of the mean."""
        block, translation = gp_design_block(basis, basis.grid.axes[0][[1, 4]])
        np.testing.assert_allclose(block.toarray(), basis.basis[[1, 4]], atol=1e-14)
        np.testing.assert_allclose(translation, basis.mean[[1, 4]])

    def test_empty(self, basis):
        """No inputs give an empty block."""
        block, translation = gp_design_block(basis, np.zeros((0, 1)))
        assert block.shape == (0, basis.size)
        assert translation.shape == (0,)

    def test_empty_on_kronecker_grid(self):
        """An empty input list works on a 2-D grid."""
        basis = kron_eigenbasis(
            [
                (SquaredExponential(1.0, 0.5), np.linspace(0, 1, 5)),
                (SquaredExponential(1.0, 0.5), np.linspace(0, 1, 4)),
            ]
        )
        block, translation = gp_design_block(basis, [])
        assert block.shape == (0, basis.size)
        assert translation.shape == (0,)

    def test_midpoint_averages(self, basis):
        """Halfway between knots the row is the mean of the two rows."""
        block, _ = gp_design_block(basis, [0.1])
        np.testing.assert_allclose(block.toarray()[0], basis.basis[:2].mean(axis=0), atol=1e-14)
