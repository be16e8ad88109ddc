"""Bayesian inference for reversible diffusions with periodic potential.

Pipeline: simulate a gradient diffusion on the torus, compute the
conjugate Gaussian posterior over Fourier coefficients of the potential,
push posterior samples through scalar functionals, and compare the
resulting credible sets against the efficiency bound delivered by a
spectral elliptic solver.
"""

from .basis import RealBasis
from .fields import FourierField, GridFunction, load_field, project_to_field, save_field
from .sde import (
    GaussianBumpPotential,
    Trajectory,
    active_backend,
    ground_truth,
    load_trajectory,
    save_trajectory,
    simulate,
    wrap_to_torus,
)

__version__ = "0.1.0"

__all__ = [
    "FourierField",
    "GridFunction",
    "GaussianBumpPotential",
    "RealBasis",
    "Trajectory",
    "active_backend",
    "ground_truth",
    "load_field",
    "load_trajectory",
    "project_to_field",
    "save_field",
    "save_trajectory",
    "simulate",
    "wrap_to_torus",
    "__version__",
]
