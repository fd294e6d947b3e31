"""Tests for the sparse linear-Gaussian solver."""

import numpy as np
import pytest
from scipy import sparse

from bayesgam.errors import InvalidSystem, NotPositiveDefinite, SingularPosterior
from bayesgam.inference import (
    factorize,
    information_vector,
    log_density,
    neg_log_posterior,
    posterior_predictive,
    precision_matrix,
    predictive_marginals,
    sample,
    solve,
)
from bayesgam.inference import linsys
from bayesgam.models import LinearGaussianSystem

BACKENDS = [
    "dense",
    pytest.param(
        "cholmod",
        marks=pytest.mark.skipif(linsys.cholmod is None, reason="scikit-sparse not installed"),
    ),
]


class TestSolve:
    """Posterior mean and precision factor."""

    def test_scalar_conjugate(self, scalar_system):
        """Precision 1 + 1 = 2 gives mean 1 and variance 0.5."""
        posterior = solve(scalar_system)
        assert posterior.mean == pytest.approx([1.0])
        assert posterior.covariance()[0, 0] == pytest.approx(0.5)
        assert posterior.log_det_precision == pytest.approx(np.log(2.0))

    def test_likelihood_only_square(self):
        """Without prior rows an invertible square design gives A^-1 y."""
        A = np.array([[2.0, 1.0], [1.0, 3.0]])
        y = np.array([1.0, -2.0])
        system = LinearGaussianSystem(sparse.csr_array(A), y, [1.0, 1.0], None, None, None)
        assert solve(system).mean == pytest.approx(np.linalg.solve(A, y))

    def test_matches_dense_oracle(self, rng, random_system, dense_posterior):
        """A random 40 x 25 system agrees with the explicit normal equations."""
        system = random_system(rng, 40, 25)
        mean, cov = dense_posterior(system)
        posterior = solve(system)
        np.testing.assert_allclose(posterior.mean, mean, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(posterior.covariance(), cov, rtol=1e-8, atol=1e-10)

    def test_factor_reconstructs_precision(self, rng, random_system):
        """The stored factor reproduces G to 1e-10 relative Frobenius norm."""
        system = random_system(rng, 30, 20)
        G = precision_matrix(system).toarray()
        error = np.linalg.norm(solve(system).precision() - G) / np.linalg.norm(G)
        assert error <= 1e-10

    def test_normal_equation_residual(self, rng, random_system):
        """G mean equals the information vector."""
        system = random_system(rng, 35, 18)
        posterior = solve(system)
        rhs = information_vector(system)
        residual = precision_matrix(system) @ posterior.mean - rhs
        assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(rhs)

    def test_row_order_invariance(self, rng, random_system):
        """Shuffling observation and prior rows leaves the mean unchanged."""
        system = random_system(rng, 30, 12)
        p, q = rng.permutation(30), rng.permutation(12)
        shuffled = LinearGaussianSystem(
            system.design[p],
            system.obs[p],
            system.obs_var[p],
            system.prior_transform[q],
            system.prior_mean[q],
            system.prior_var[q],
        )
        np.testing.assert_allclose(solve(shuffled).mean, solve(system).mean, rtol=1e-10)

    def test_scale_equivariance(self, rng, random_system):
        """Doubling every variance keeps the mean and doubles the covariance."""
        system = random_system(rng, 25, 10)
        doubled = LinearGaussianSystem(
            system.design,
            system.obs,
            2.0 * system.obs_var,
            system.prior_transform,
            system.prior_mean,
            2.0 * system.prior_var,
        )
        base, scaled = solve(system), solve(doubled)
        np.testing.assert_allclose(scaled.mean, base.mean, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(scaled.covariance(), 2.0 * base.covariance(), rtol=1e-9)

    def test_vague_prior_is_least_squares(self, rng):
        """Identity prior with variance 1e12 converges to least squares."""
        A = rng.standard_normal((30, 4))
        y = rng.standard_normal(30)
        system = LinearGaussianSystem(
            sparse.csr_array(A), y, np.ones(30), sparse.eye_array(4), np.zeros(4), 1e12
        )
        expected = np.linalg.lstsq(A, y, rcond=None)[0]
        np.testing.assert_allclose(solve(system).mean, expected, rtol=1e-6, atol=1e-8)

    def test_singular_reports_pivot(self):
        """Two parameters seen only through their sum are not identified."""
        system = LinearGaussianSystem(
            sparse.csr_array([[1.0, 1.0]]), [1.0], [1.0], None, None, None
        )
        with pytest.raises(SingularPosterior) as info:
            solve(system)
        assert info.value.pivot in (0, 1)

    def test_jitter_opts_into_regularization(self):
        """An explicit jitter makes the singular system solvable."""
        system = LinearGaussianSystem(
            sparse.csr_array([[1.0, 1.0]]), [1.0], [1.0], None, None, None
        )
        posterior = solve(system, jitter=1e-6)
        assert posterior.mean.sum() == pytest.approx(1.0, rel=1e-4)

    def test_rejects_nonpositive_variance(self):
        """Observation variances must be positive."""
        with pytest.raises(InvalidSystem):
            LinearGaussianSystem(sparse.csr_array([[1.0]]), [1.0], [0.0], None, None, None)

    def test_rejects_column_mismatch(self):
        """A and B must have the same column count."""
        with pytest.raises(InvalidSystem):
            LinearGaussianSystem(
                sparse.csr_array(np.ones((2, 2))), [1.0, 2.0], 1.0, sparse.eye_array(3), 0.0, 1.0
            )


class TestFactorize:
    """Both factorization backends and the pivot test."""

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_matches_dense_oracle(self, backend, rng, random_system, dense_posterior):
        system = random_system(rng, 40, 25)
        mean, cov = dense_posterior(system)
        posterior = solve(system, backend=backend)
        np.testing.assert_allclose(posterior.mean, mean, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(posterior.covariance(), cov, rtol=1e-8, atol=1e-10)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_factor_and_log_det(self, backend, rng, random_system):
        """``G[perm][:, perm] = L L'`` and the log-determinant matches numpy."""
        G = precision_matrix(random_system(rng, 30, 20)).toarray()
        L, perm, log_det = factorize(G, backend=backend)
        dense = L.toarray()
        np.testing.assert_allclose(dense @ dense.T, G[np.ix_(perm, perm)], atol=1e-10)
        assert log_det == pytest.approx(np.linalg.slogdet(G)[1], rel=1e-12)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_widely_spread_diagonal(self, backend):
        """Each pivot is judged against its own diagonal entry."""
        L, _, log_det = factorize(np.diag([1e14, 0.1]), backend=backend)
        np.testing.assert_allclose(np.sort(L.diagonal()), np.sqrt([0.1, 1e14]), rtol=1e-14)
        assert log_det == pytest.approx(np.log(1e13), rel=1e-14)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_badly_scaled_columns(self, backend):
        """A large column scale is not mistaken for a singular posterior."""
        system = LinearGaussianSystem(
            sparse.csr_array([[1e7, 0.0]]),
            [3.0],
            [1.0],
            sparse.csr_array([[0.0, 1.0]]),
            [2.0],
            [10.0],
        )
        posterior = solve(system, backend=backend)
        np.testing.assert_allclose(posterior.mean, [3e-7, 2.0], rtol=1e-12)
        np.testing.assert_allclose(np.diag(posterior.covariance()), [1e-14, 10.0], rtol=1e-12)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_rescaling_keeps_the_verdict(self, backend, rng):
        """Scaling one column by 1e8 changes neither solvability nor the fit."""
        A = rng.standard_normal((20, 3))
        y = rng.standard_normal(20)
        base = LinearGaussianSystem(sparse.csr_array(A), y, 1.0, None, None, None)
        scaled = LinearGaussianSystem(
            sparse.csr_array(A * [1e8, 1.0, 1.0]), y, 1.0, None, None, None
        )
        expected = solve(base, backend=backend).mean
        np.testing.assert_allclose(
            solve(scaled, backend=backend).mean * [1e8, 1.0, 1.0], expected, rtol=1e-8
        )

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_singular_reports_pivot(self, backend):
        G = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
        with pytest.raises(SingularPosterior) as info:
            factorize(G, backend=backend)
        assert info.value.pivot in (0, 1)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_round_off_pivot_rejected(self, backend):
        """A pivot that survives only through round-off is still singular."""
        v = np.array([1.0, 1.0 / 3.0, 2.0 / 7.0])
        G = np.outer(v, v) + np.diag([0.0, 0.0, 1e-20])
        with pytest.raises(SingularPosterior):
            factorize(G, backend=backend)

    @pytest.mark.skipif(linsys.cholmod is None, reason="scikit-sparse not installed")
    def test_cholmod_keeps_banded_factor_sparse(self):
        """A second-difference chain on 5000 knots factors with linear fill."""
        n = 5000
        D = sparse.diags_array([1.0, -2.0, 1.0], offsets=[0, 1, 2], shape=(n - 2, n))
        G = sparse.csc_array(D.T @ D + 1e-2 * sparse.eye_array(n))
        L, _, log_det = factorize(G, backend="cholmod")
        assert L.nnz <= 50 * n
        assert np.isfinite(log_det)

    def test_cholmod_backend_requires_scikit_sparse(self, monkeypatch):
        monkeypatch.setattr(linsys, "cholmod", None)
        with pytest.raises(InvalidSystem, match="scikit-sparse"):
            factorize(np.eye(2), backend="cholmod")
        L, _, _ = factorize(np.eye(2), backend="auto")
        np.testing.assert_array_equal(L.toarray(), np.eye(2))

    def test_unknown_backend(self):
        with pytest.raises(InvalidSystem):
            factorize(np.eye(2), backend="lu")


class TestSample:
    """Posterior draws through the precision factor."""

    def test_count_zero_rejected(self, scalar_system):
        """At least one draw is required."""
        with pytest.raises(InvalidSystem):
            sample(solve(scalar_system), 0, 1)

    def test_scalar_mean_within_clt_bound(self, scalar_system):
        """10^5 draws average to 1 within three standard errors."""
        draws = sample(solve(scalar_system), 100_000, 7)
        assert draws.shape == (100_000, 1)
        assert abs(draws.mean() - 1.0) <= 3.0 * np.sqrt(0.5 / 100_000)

    def test_deterministic_under_seed(self, rng, random_system):
        """The same seed gives the same draws."""
        posterior = solve(random_system(rng, 20, 6))
        np.testing.assert_array_equal(sample(posterior, 10, 3), sample(posterior, 10, 3))


class TestPredictive:
    """Joint and marginal posterior predictive moments."""

    def test_zero_design_is_pure_noise(self, rng, random_system):
        """Rows with no signal predict 0 with covariance diag(noise)."""
        posterior = solve(random_system(rng, 20, 5))
        mean, cov = posterior_predictive(posterior, sparse.csr_array((3, 5)), [1.0, 2.0, 3.0])
        assert mean == pytest.approx(np.zeros(3))
        np.testing.assert_allclose(cov, np.diag([1.0, 2.0, 3.0]))

    def test_scalar(self, scalar_system):
        """N(1.0, 0.5 + 1)."""
        mean, cov = posterior_predictive(solve(scalar_system), [[1.0]], [1.0])
        assert mean[0] == pytest.approx(1.0)
        assert cov[0, 0] == pytest.approx(1.5)

    def test_held_out_rows_match_dense(self, rng, random_system, dense_posterior):
        """20 new rows agree with A* C A*' + noise."""
        system = random_system(rng, 40, 15)
        mu, C = dense_posterior(system)
        A_new = rng.standard_normal((20, 15))
        noise = rng.uniform(0.5, 1.5, 20)
        mean, cov = posterior_predictive(solve(system), sparse.csr_array(A_new), noise)
        np.testing.assert_allclose(mean, A_new @ mu, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(cov, A_new @ C @ A_new.T + np.diag(noise), rtol=1e-8, atol=1e-10)

    def test_marginals_equal_joint_diagonal(self, rng, random_system):
        """The chunked fast path gives the diagonal of the joint covariance."""
        posterior = solve(random_system(rng, 30, 10))
        A_new = sparse.csr_array(rng.standard_normal((25, 10)))
        _, cov = posterior_predictive(posterior, A_new, np.full(25, 0.3))
        _, var = predictive_marginals(posterior, A_new, np.full(25, 0.3), chunk=7)
        np.testing.assert_allclose(var, np.diag(cov), rtol=1e-10)


class TestLogDensity:
    """Gaussian log density."""

    def test_standard_normal_at_zero(self):
        """-0.5 log(2 pi)."""
        assert log_density([0.0], [[1.0]], [0.0]) == pytest.approx(-0.5 * np.log(2 * np.pi))

    def test_bivariate(self):
        """N(0, I2) at (1, 1) is -log(2 pi) - 1."""
        value = log_density(np.zeros(2), np.eye(2), [1.0, 1.0])
        assert value == pytest.approx(-np.log(2 * np.pi) - 1.0)

    def test_matches_explicit_inverse(self, rng):
        """A random 6-dim case matches the textbook formula."""
        M = rng.standard_normal((6, 6))
        cov = M @ M.T + 6 * np.eye(6)
        mu, x = rng.standard_normal(6), rng.standard_normal(6)
        r = x - mu
        expected = -0.5 * (
            6 * np.log(2 * np.pi) + np.linalg.slogdet(cov)[1] + r @ np.linalg.inv(cov) @ r
        )
        assert log_density(mu, cov, x) == pytest.approx(expected, rel=1e-10)

    def test_indefinite_rejected(self):
        """A non positive definite covariance is an error."""
        with pytest.raises(NotPositiveDefinite):
            log_density(np.zeros(2), [[1.0, 2.0], [2.0, 1.0]], np.zeros(2))


class TestNegLogPosterior:
    """Quadratic misfit used by fit summaries and tuning."""

    def test_scalar_at_mean(self, scalar_system):
        """At theta = 1: 0.5 (2 - 1)^2 + 0.5 (1 - 0)^2 = 1."""
        assert neg_log_posterior(scalar_system, [1.0]) == pytest.approx(1.0)

    def test_minimized_at_posterior_mean(self, rng, random_system):
        """Moving away from the mean increases the objective."""
        system = random_system(rng, 20, 6)
        mean = solve(system).mean
        base = neg_log_posterior(system, mean)
        for _ in range(5):
            assert neg_log_posterior(system, mean + 1e-3 * rng.standard_normal(6)) > base
