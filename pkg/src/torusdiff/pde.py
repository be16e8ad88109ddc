"""Spectral Galerkin solver for div(mu grad u) = psi on the torus.

With A_mu u = div(mu grad u), testing against a basis function phi and
integrating by parts gives <A_mu u, phi> = -int mu grad u . grad phi, so
the Galerkin system reads

    S c = -b,    S_jl = int mu0 grad phi_j . grad phi_l,   b_j = <psi, phi_j>_2,

with S the (positive) stiffness matrix on the zero-mean subspace.  The
solution u = A_mu0^{-1} psi is the least-favorable direction of the
estimation problem; the efficiency bound for the functional with
representor psi is V = int mu0 |grad u|^2, the variance of the limiting
normal distribution of sqrt(T) (Psi_hat_T - Psi(B0)).

For mu0 = 1 the matrix is diagonal with entries 4 pi^2 |k|^2, which pins
the sign convention: psi = sqrt(2) cos(2 pi k.x) gives
u = -psi / (4 pi^2 |k|^2) and V = 1 / (4 pi^2 |k|^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .basis import RealBasis
from .fields import FourierField, GridFunction, grid_points, project_to_field
from .functionals import FunctionalSpec, invariant_measure, representor
from .sde import Trajectory

__all__ = [
    "EllipticOperator",
    "EfficiencyReport",
    "assemble",
    "solve",
    "efficient_variance",
    "efficient_estimator",
]


@dataclass(frozen=True)
class EllipticOperator:
    """Assembled weighted stiffness matrix over the real basis."""

    weight: GridFunction  # mu0 on the quadrature grid, strictly positive
    basis: RealBasis
    stiffness: np.ndarray = field(repr=False)

    @property
    def galerkin_cutoff(self) -> int:
        return self.basis.cutoff


def assemble(mu0: GridFunction, galerkin_cutoff: int) -> EllipticOperator:
    """Stiffness S_jl = int mu0 grad phi_j . grad phi_l by lattice quadrature."""
    if np.any(mu0.values <= 0):
        raise ValueError("weight must be strictly positive on the grid")
    if mu0.n < 2 * galerkin_cutoff + 1:
        raise ValueError(
            f"grid resolution {mu0.n} too coarse for Galerkin cutoff {galerkin_cutoff}")
    basis = RealBasis(mu0.dim, galerkin_cutoff)
    pts = grid_points(mu0.dim, mu0.n)
    g = basis.gradients(pts)  # (n^d, m, d)
    w = mu0.values.ravel() / pts.shape[0]
    m = basis.size
    s = np.zeros((m, m))
    for i in range(mu0.dim):
        gw = g[:, :, i] * w[:, None]
        s += g[:, :, i].T @ gw
    return EllipticOperator(weight=mu0, basis=basis, stiffness=0.5 * (s + s.T))


@dataclass(frozen=True)
class EfficiencyReport:
    """Solution of the efficiency PDE and the associated variance bound."""

    solution: FourierField
    variance: float  # V = int mu0 |grad u|^2 >= 0
    residual: float  # ||A_mu0 u - psi||_L2 on the grid
    galerkin_cutoff: int

    def to_dict(self) -> dict:
        return {
            "V": self.variance,
            "residual": self.residual,
            "K_G": self.galerkin_cutoff,
        }


def solve(op: EllipticOperator, psi: FourierField) -> EfficiencyReport:
    """Galerkin solution of div(mu0 grad u) = psi for zero-mean psi."""
    if psi.c0 != 0.0:
        raise ValueError("right-hand side must have zero mean (coeff(0) = 0)")
    m = op.basis.size
    b = op.basis.from_field(psi) if psi.cutoff <= op.galerkin_cutoff else _project_load(op, psi)
    try:
        chol = scipy.linalg.cholesky(op.stiffness, lower=True)
    except scipy.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(op.stiffness)[0])
        raise RuntimeError(
            f"stiffness matrix singular on the zero-mean subspace "
            f"(smallest eigenvalue ~ {smallest:.3e})")
    coeffs = -scipy.linalg.cho_solve((chol, True), b)
    u = op.basis.to_field(coeffs)
    variance = float(coeffs @ op.stiffness @ coeffs)
    residual = _residual_norm(op, u, psi)
    return EfficiencyReport(solution=u, variance=variance, residual=residual,
                            galerkin_cutoff=op.galerkin_cutoff)


def _project_load(op: EllipticOperator, psi: FourierField) -> np.ndarray:
    truncated = psi.with_cutoff(op.galerkin_cutoff)
    return op.basis.from_field(truncated)


def _residual_norm(op: EllipticOperator, u: FourierField, psi: FourierField) -> float:
    """||div(mu0 grad u) - psi||_L2 with the flux projected spectrally.

    The flux mu0 grad u is not band-limited; it is projected onto twice
    the Galerkin cutoff before differentiating, so the reported number
    contains both the Galerkin error and that projection error.
    """
    n = op.weight.n
    dim = op.weight.dim
    pts = grid_points(dim, n)
    grad = u.gradient_at(pts)  # (n^d, dim)
    mu = op.weight.values.ravel()
    res_cutoff = min(2 * op.galerkin_cutoff, (n - 1) // 2)
    div_vals = np.zeros(pts.shape[0])
    for i in range(dim):
        flux = GridFunction(dim, n, (mu * grad[:, i]).reshape(op.weight.values.shape))
        flux_hat = project_to_field(flux, res_cutoff)
        div_vals += flux_hat.gradient()[i].evaluate(pts)
    diff = div_vals - psi.evaluate(pts)
    return float(np.sqrt(np.mean(diff**2)))


def efficient_variance(B0, spec: FunctionalSpec, galerkin_cutoff: int = 8,
                       n: int = 64, psi: FourierField | None = None) -> EfficiencyReport:
    """Compose representor -> elliptic solve -> variance bound at B0.

    B0 is the known data-generating potential (anything with a grid
    representation); mu0 is computed from it, never estimated from data.
    """
    mu0 = invariant_measure(B0, n).density
    if psi is None:
        cutoff = galerkin_cutoff if not isinstance(B0, FourierField) else None
        psi = representor(spec, B0, n=n, cutoff=cutoff)
    op = assemble(mu0, galerkin_cutoff)
    return solve(op, psi)


def efficient_estimator(traj: Trajectory, solution: FourierField, psi0_value: float) -> float:
    """Psi_hat_T = Psi(B0) + (1/T) sum_r grad(u)(x_r) . noise_r.

    Uses the trajectory's recorded driving noise (simulation-side
    construction: requires knowing B0, hence u).
    """
    if traj.noise.shape[0] == 0:
        raise ValueError("trajectory carries no noise record")
    grad = solution.gradient_at(traj.points[:-1])
    return float(psi0_value + np.sum(grad * traj.noise) / traj.horizon)
