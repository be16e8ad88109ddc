"""Conjugate Gaussian posterior over the real Fourier coordinates of B.

Given a continuously observed path (discretized to left-endpoint Riemann
sums) and a diagonal Gaussian prior N(0, Upsilon) on the cos/sin
coordinates, the posterior is

    N( (Sigma + Upsilon^-1)^-1 H ,  (Sigma + Upsilon^-1)^-1 )

with Sigma the gradient Gram matrix of the basis along the path and H
the Ito integral of the basis gradients against the increments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .basis import RealBasis
from .fields import FourierField
from .rng import stream
from .sde import Trajectory

__all__ = [
    "ConditioningError",
    "GaussianPosterior",
    "gram_matrix",
    "drift_vector",
    "conjugate_posterior",
    "sample_posterior",
]

_CHUNK = 1 << 16  # trajectory steps per accumulation block


class ConditioningError(RuntimeError):
    pass


def gram_matrix(traj: Trajectory, basis: RealBasis) -> np.ndarray:
    """Sigma_jl = sum_r grad(phi_j)(x_r) . grad(phi_l)(x_r) dt (left endpoints)."""
    if traj.n_steps < 1:
        raise ValueError("trajectory holds no increments")
    m = basis.size
    out = np.zeros((m, m))
    pts = traj.points[:-1]
    for lo in range(0, pts.shape[0], _CHUNK):
        g = basis.gradients(pts[lo : lo + _CHUNK])  # (n, m, d)
        flat = g.swapaxes(1, 2).reshape(-1, m)
        out += flat.T @ flat
    out *= traj.dt
    return 0.5 * (out + out.T)


def drift_vector(traj: Trajectory, basis: RealBasis) -> np.ndarray:
    """H_j = sum_r grad(phi_j)(x_r) . (x_{r+1} - x_r), Ito convention."""
    if traj.n_steps < 1:
        raise ValueError("trajectory holds no increments")
    m = basis.size
    out = np.zeros(m)
    pts = traj.points
    for lo in range(0, traj.n_steps, _CHUNK):
        hi = min(lo + _CHUNK, traj.n_steps)
        g = basis.gradients(pts[lo:hi])  # (n, m, d)
        incr = pts[lo + 1 : hi + 1] - pts[lo:hi]
        out += np.einsum("nmd,nd->m", g, incr)
    return out


@dataclass(frozen=True)
class GaussianPosterior:
    """Posterior mean and covariance factors over real basis coordinates."""

    mean: np.ndarray
    precision: np.ndarray = field(repr=False)
    covariance_factor: np.ndarray = field(repr=False)  # lower Cholesky of precision^-1
    basis: RealBasis

    @property
    def size(self) -> int:
        return self.mean.shape[0]

    def covariance(self) -> np.ndarray:
        return self.covariance_factor @ self.covariance_factor.T

    def mean_field(self) -> FourierField:
        return self.basis.to_field(self.mean)

    def sample_coordinates(self, count: int, seed: int | None = None,
                           rng: np.random.Generator | None = None) -> np.ndarray:
        """(count, m) array of posterior draws in basis coordinates."""
        if rng is None:
            rng = stream(0 if seed is None else seed)
        z = rng.standard_normal((count, self.size))
        return self.mean + z @ self.covariance_factor.T

    def residual(self, drift: np.ndarray) -> float:
        """Relative residual of (Sigma + Upsilon^-1) mean = H."""
        num = np.linalg.norm(self.precision @ self.mean - drift)
        den = max(np.linalg.norm(drift), 1e-300)
        return float(num / den)


def conjugate_posterior(gram: np.ndarray, drift: np.ndarray,
                        prior_variances: np.ndarray, basis: RealBasis) -> GaussianPosterior:
    """Form the posterior from Sigma, H and the diagonal prior covariance.

    The mean solves the normal equations through the Cholesky factor of
    the precision (no explicit inverse).  A failed factorization is
    retried once with a trace-scaled jitter, then reported with the
    smallest-eigenvalue estimate.
    """
    gram = np.asarray(gram, dtype=np.float64)
    drift = np.asarray(drift, dtype=np.float64)
    prior_variances = np.asarray(prior_variances, dtype=np.float64)
    m = basis.size
    if gram.shape != (m, m) or drift.shape != (m,) or prior_variances.shape != (m,):
        raise ValueError("inconsistent shapes for gram/drift/prior")
    if np.any(prior_variances <= 0):
        raise ValueError("prior variances must be strictly positive")

    asym = np.max(np.abs(gram - gram.T))
    scale = max(np.max(np.abs(gram)), 1.0)
    if asym > 1e-8 * scale:
        raise ValueError(f"gram matrix asymmetry {asym:.3e} exceeds tolerance")
    precision = 0.5 * (gram + gram.T) + np.diag(1.0 / prior_variances)

    jitter = 1e-10 * np.trace(precision) / m
    try:
        chol = scipy.linalg.cholesky(precision, lower=True)
    except scipy.linalg.LinAlgError:
        try:
            chol = scipy.linalg.cholesky(precision + jitter * np.eye(m), lower=True)
            precision = precision + jitter * np.eye(m)
        except scipy.linalg.LinAlgError:
            smallest = float(np.linalg.eigvalsh(precision)[0])
            raise ConditioningError(
                f"posterior precision is not positive definite "
                f"(smallest eigenvalue ~ {smallest:.3e})")
    mean = scipy.linalg.cho_solve((chol, True), drift)
    # covariance = Linv.T Linv; re-factor it to expose a lower-triangular root
    linv = scipy.linalg.solve_triangular(chol, np.eye(m), lower=True)
    cov = linv.T @ linv
    cov_factor = np.linalg.cholesky(0.5 * (cov + cov.T))
    return GaussianPosterior(mean=mean, precision=precision,
                             covariance_factor=cov_factor, basis=basis)


def sample_posterior(post: GaussianPosterior, count: int, seed: int | None = None,
                     rng: np.random.Generator | None = None) -> list[FourierField]:
    """Posterior draws mapped back to zero-mean Fourier fields."""
    coords = post.sample_coordinates(count, seed=seed, rng=rng)
    return post.basis.fields_from_coords(coords)
