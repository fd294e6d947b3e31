"""Posterior of a linear-Gaussian system through a sparse Cholesky factor.

The posterior precision ``G = A' W A + B' V B`` (``W``, ``V`` the inverse
noise and prior variances) is reordered in a fill-reducing order and
factored as ``G[p][:, p] = L L'``: sparsely with CHOLMOD when scikit-sparse
is installed, with dense LAPACK otherwise. Every posterior quantity (mean,
draws, predictive moments) is a pair of triangular solves with ``L``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg, sparse
from scipy.linalg import lapack
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import spsolve_triangular

from ..errors import InvalidSystem, NotPositiveDefinite, SingularPosterior
from ..models import FloatArray, LinearGaussianSystem, as_csr, as_vector

try:
    from sksparse import cholmod
except ImportError:  # optional "sparse" extra
    cholmod = None  # type: ignore[assignment]

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))

BACKENDS = ("auto", "cholmod", "dense")


def precision_matrix(system: LinearGaussianSystem) -> sparse.csc_array:
    """Posterior precision ``A' W A + B' V B``."""
    A = system.design
    G = A.T @ sparse.diags_array(1.0 / system.obs_var) @ A
    if system.n_prior:
        B = system.prior_transform
        G = G + B.T @ sparse.diags_array(1.0 / system.prior_var) @ B
    return sparse.csc_array(G)


def information_vector(system: LinearGaussianSystem) -> FloatArray:
    """Right-hand side ``A' W y + B' V mu_pr`` of the posterior mean equations."""
    a = np.asarray(system.design.T @ (system.obs / system.obs_var), dtype=np.float64)
    if system.n_prior:
        a = a + system.prior_transform.T @ (system.prior_mean / system.prior_var)
    return np.asarray(a, dtype=np.float64)


def _check_pivots(
    diag: FloatArray, reference: FloatArray, perm: NDArray[np.intp], pivot_tolerance: float
) -> None:
    # relative to each pivot's own diagonal entry
    small = np.flatnonzero(diag**2 <= pivot_tolerance * reference)
    if small.size:
        k = int(small[0])
        raise SingularPosterior(
            int(perm[k]),
            detail=f"pivot {diag[k] ** 2:.3e} is round-off relative to {reference[k]:.3e}",
        )


def _factorize_dense(
    G: sparse.csr_matrix, jitter: float, pivot_tolerance: float
) -> tuple[sparse.csc_array, NDArray[np.intp], float]:
    n = G.shape[0]
    perm = np.asarray(reverse_cuthill_mckee(G, symmetric_mode=True), dtype=np.intp)
    dense = G.toarray()[np.ix_(perm, perm)]
    if jitter:
        dense[np.diag_indices(n)] += jitter
    reference = np.diag(dense).copy()
    factor, info = lapack.dpotrf(dense, lower=1, clean=1)
    if info < 0:
        raise InvalidSystem(f"potrf rejected argument {-info}")
    if info > 0:
        raise SingularPosterior(int(perm[info - 1]), detail="non-positive pivot")
    diag = np.diag(factor)
    _check_pivots(diag, reference, perm, pivot_tolerance)
    L = sparse.csc_array(np.tril(factor))
    L.eliminate_zeros()
    return L, perm, float(2.0 * np.sum(np.log(diag)))


def _factorize_cholmod(
    G: sparse.csr_matrix, jitter: float, pivot_tolerance: float
) -> tuple[sparse.csc_array, NDArray[np.intp], float]:
    A = sparse.csc_matrix(G)
    symbolic = cholmod.analyze(A, mode="supernodal")
    perm = np.asarray(symbolic.P(), dtype=np.intp)
    try:
        factor = symbolic.cholesky(A, beta=jitter)
    except cholmod.CholmodNotPositiveDefiniteError as exc:
        raise SingularPosterior(int(perm[exc.column]), detail="non-positive pivot") from exc
    L = sparse.csc_array(factor.L())
    diag = L.diagonal()
    reference = A.diagonal()[perm] + jitter
    _check_pivots(diag, reference, perm, pivot_tolerance)
    return L, perm, float(factor.logdet())


def factorize(
    G: sparse.sparray | NDArray[np.float64],
    *,
    jitter: float = 0.0,
    pivot_tolerance: float = 1e-13,
    backend: str = "auto",
) -> tuple[sparse.csc_array, NDArray[np.intp], float]:
    """Cholesky-factor a symmetric matrix in a fill-reducing order.

    ``backend="cholmod"`` factors ``G`` sparsely with CHOLMOD and its own
    ordering; ``"dense"`` runs LAPACK ``potrf`` after a reverse
    Cuthill-McKee reordering. ``"auto"`` uses CHOLMOD when scikit-sparse
    is installed.

    Returns:
        ``(L, perm, log_det)`` with ``G[perm][:, perm] = L L'`` and
        ``log_det = log det G``.

    Raises:
        SingularPosterior: a pivot is non-positive or its square is below
            ``pivot_tolerance`` times the matching diagonal entry of ``G``;
            ``pivot`` names the original parameter index.
    """
    G = sparse.csr_matrix(G)
    if G.shape[0] == 0:
        raise InvalidSystem("cannot factor an empty precision matrix")
    if backend not in BACKENDS:
        raise InvalidSystem(f"unknown factorization backend '{backend}'")
    if backend == "cholmod" and cholmod is None:
        raise InvalidSystem("the cholmod backend needs scikit-sparse")
    if backend == "dense" or cholmod is None:
        return _factorize_dense(G, jitter, pivot_tolerance)
    return _factorize_cholmod(G, jitter, pivot_tolerance)


@dataclass(frozen=True, eq=False)
class Posterior:
    """Gaussian posterior held as its mean and precision factor."""

    mean: FloatArray
    factor: sparse.csc_array  # lower triangular, G[perm][:, perm] = L L'
    permutation: NDArray[np.intp]
    log_det_precision: float

    @property
    def n_par(self) -> int:
        return int(self.mean.shape[0])

    @cached_property
    def _lower(self) -> sparse.csr_array:
        return sparse.csr_array(self.factor)

    @cached_property
    def _upper(self) -> sparse.csr_array:
        return sparse.csr_array(self.factor.T)

    def whiten(self, rows: ArrayLike | sparse.sparray) -> FloatArray:
        """``L^-1 P r'`` for each row ``r``; shape ``(n_par, n_rows)``.

        For a row ``r`` the squared column norm is ``r G^-1 r'``.
        """
        rhs = as_csr(rows).T.toarray()
        if rhs.shape[0] != self.n_par:
            raise InvalidSystem(f"rows have {rhs.shape[0]} columns, posterior has {self.n_par}")
        if rhs.shape[1] == 0:
            return np.zeros((self.n_par, 0))
        return np.asarray(spsolve_triangular(self._lower, rhs[self.permutation], lower=True))

    def unwhiten(self, z: FloatArray) -> FloatArray:
        """``P' L^-T z``; maps standard normal columns to ``N(0, G^-1)`` columns."""
        w = np.asarray(spsolve_triangular(self._upper, z, lower=False))
        out = np.empty_like(w)
        out[self.permutation] = w
        return out

    def solve_precision(self, rhs: ArrayLike) -> FloatArray:
        """``G^-1 rhs`` for a vector or a column block."""
        rhs_arr = np.asarray(rhs, dtype=np.float64)
        y = spsolve_triangular(self._lower, rhs_arr[self.permutation], lower=True)
        return self.unwhiten(np.asarray(y))

    def precision(self) -> FloatArray:
        """Dense reconstruction of ``G``."""
        Lp = self.factor.toarray()
        G_perm = Lp @ Lp.T
        G = np.empty_like(G_perm)
        G[np.ix_(self.permutation, self.permutation)] = G_perm
        return G

    def covariance(self) -> FloatArray:
        """Dense posterior covariance ``G^-1``; desk-scale problems only."""
        cov = self.solve_precision(np.eye(self.n_par))
        return 0.5 * (cov + cov.T)


def solve(
    system: LinearGaussianSystem,
    *,
    jitter: float = 0.0,
    pivot_tolerance: float = 1e-13,
    backend: str = "auto",
) -> Posterior:
    """Posterior mean and precision factor of ``system``."""
    G = precision_matrix(system)
    L, perm, log_det = factorize(
        G, jitter=jitter, pivot_tolerance=pivot_tolerance, backend=backend
    )
    draft = Posterior(
        mean=np.zeros(system.n_par), factor=L, permutation=perm, log_det_precision=log_det
    )
    mean = draft.solve_precision(information_vector(system))
    logger.debug(
        "solved system: %d obs, %d params, %d prior rows, factor nnz %d",
        system.n_obs,
        system.n_par,
        system.n_prior,
        L.nnz,
    )
    return replace(draft, mean=mean)


def sample(
    posterior: Posterior, count: int, rng: np.random.Generator | int | None = None
) -> FloatArray:
    """Posterior draws as a ``(count, n_par)`` array."""
    if count < 1:
        raise InvalidSystem("count must be at least 1")
    generator = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    z = generator.standard_normal((posterior.n_par, count))
    return (posterior.mean[:, None] + posterior.unwhiten(z)).T


def posterior_predictive(
    posterior: Posterior,
    design_new: ArrayLike | sparse.sparray,
    obs_var_new: ArrayLike,
) -> tuple[FloatArray, FloatArray]:
    """Joint predictive mean and covariance at new design rows."""
    rows = as_csr(design_new)
    mean = np.asarray(rows @ posterior.mean)
    Z = posterior.whiten(rows)
    cov = Z.T @ Z
    cov[np.diag_indices_from(cov)] += as_vector(obs_var_new, rows.shape[0], "obs_var_new")
    return mean, cov


def predictive_marginals(
    posterior: Posterior,
    design_new: ArrayLike | sparse.sparray,
    obs_var_new: ArrayLike | None = None,
    *,
    chunk: int = 512,
) -> tuple[FloatArray, FloatArray]:
    """Predictive mean and marginal variance without the joint covariance."""
    rows = as_csr(design_new)
    m = rows.shape[0]
    mean = np.asarray(rows @ posterior.mean)
    var = np.empty(m)
    for start in range(0, m, chunk):
        Z = posterior.whiten(rows[start : start + chunk])
        var[start : start + chunk] = np.einsum("ij,ij->j", Z, Z)
    if obs_var_new is not None:
        var = var + as_vector(obs_var_new, m, "obs_var_new")
    return mean, var


def log_density(mean: ArrayLike, cov: ArrayLike, point: ArrayLike) -> float:
    """Log density of ``N(mean, cov)`` at ``point``."""
    mu = np.asarray(mean, dtype=np.float64).ravel()
    x = np.asarray(point, dtype=np.float64).ravel()
    sigma = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    n = mu.shape[0]
    if x.shape[0] != n or sigma.shape != (n, n):
        raise InvalidSystem("mean, covariance and point sizes differ")
    try:
        c, lower = linalg.cho_factor(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"covariance is not positive definite: {exc}") from exc
    residual = x - mu
    alpha = linalg.cho_solve((c, lower), residual)
    log_det = 2.0 * np.sum(np.log(np.diag(c)))
    return float(-0.5 * (n * LOG_2PI + log_det + residual @ alpha))


def neg_log_posterior(system: LinearGaussianSystem, theta: ArrayLike) -> float:
    """Weighted data misfit plus weighted prior misfit at ``theta``, halved."""
    theta_arr = np.asarray(theta, dtype=np.float64)
    r_obs = system.obs - system.design @ theta_arr
    value = 0.5 * float(np.sum(r_obs**2 / system.obs_var))
    if system.n_prior:
        r_pr = system.prior_transform @ theta_arr - system.prior_mean
        value += 0.5 * float(np.sum(r_pr**2 / system.prior_var))
    return value
