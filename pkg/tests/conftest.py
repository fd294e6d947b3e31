"""Shared fixtures: random linear-Gaussian systems and their dense oracles."""

from collections.abc import Callable

import numpy as np
import pytest
from scipy import sparse

from bayesgam.models import LinearGaussianSystem


def _random_system(
    rng: np.random.Generator, n_obs: int, n_par: int, density: float = 0.3
) -> LinearGaussianSystem:
    mask = rng.random((n_obs, n_par)) < density
    A = rng.standard_normal((n_obs, n_par)) * mask
    return LinearGaussianSystem(
        design=sparse.csr_array(A),
        obs=rng.standard_normal(n_obs),
        obs_var=rng.uniform(0.5, 2.0, n_obs),
        prior_transform=sparse.eye_array(n_par, format="csr"),
        prior_mean=rng.standard_normal(n_par),
        prior_var=rng.uniform(0.5, 3.0, n_par),
    )


def _dense_posterior(system: LinearGaussianSystem) -> tuple[np.ndarray, np.ndarray]:
    A = system.design.toarray()
    B = system.prior_transform.toarray()
    G = A.T @ np.diag(1.0 / system.obs_var) @ A
    a = A.T @ (system.obs / system.obs_var)
    if system.n_prior:
        G = G + B.T @ np.diag(1.0 / system.prior_var) @ B
        a = a + B.T @ (system.prior_mean / system.prior_var)
    cov = np.linalg.inv(G)
    return cov @ a, cov


@pytest.fixture
def rng() -> np.random.Generator:
    """Fixed random stream."""
    return np.random.default_rng(20240611)


@pytest.fixture
def random_system() -> Callable[..., LinearGaussianSystem]:
    """Factory for random sparse systems with an identity prior."""
    return _random_system


@pytest.fixture
def dense_posterior() -> Callable[[LinearGaussianSystem], tuple[np.ndarray, np.ndarray]]:
    """Brute-force mean and covariance via an explicit inverse."""
    return _dense_posterior


@pytest.fixture
def scalar_system() -> LinearGaussianSystem:
    """A = B = 1, y = 2, unit variances, prior mean 0: posterior N(1, 0.5)."""
    one = sparse.csr_array(np.ones((1, 1)))
    return LinearGaussianSystem(one, [2.0], [1.0], one, [0.0], [1.0])
