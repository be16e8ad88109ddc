"""Rescaled Gaussian (periodic Matern) and Besov-Laplace priors.

The Matern-type prior draws independent complex Fourier coefficients on
the canonical half lattice,

    c_k = v_k (g_k + i g'_k) / sqrt(2),          g, g' iid N(0, 1),

so the real cos/sin coordinates are N(0, v_k^2) and the constant mode is
pinned to zero (identifiability).  Two spectral conventions are in
circulation for the per-mode scale; both the weight form and the
time-horizon exponent are explicit knobs here rather than hard-coded:

    v_k = amplitude * (1 + w |k|^2)^(mode_exponent) * T^(time_exponent)

with w = 4 pi^2 ("angular", the covariance-kernel form) or w = 1 (the
plain form used in the numerical study).  Defaults: mode_exponent
= -(s+1)/2, time_exponent = -d/(4s+2d), angular weights.

The Besov-Laplace prior is a truncated tensor-product Haar wavelet series
with iid Laplace coefficients, level weights 2^(-l(s+1-d/2)) and global
scale T^(-d/(2s+d)); only sampling is provided (no conjugacy).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .fields import FourierField, GridFunction, canonical_frequencies
from .rng import stream

__all__ = [
    "MaternPrior",
    "BesovLaplacePrior",
    "sample_matern",
    "sample_besov_laplace",
    "besov_coefficients",
]

# The Laplace density is specified through its exponent exp(-|z|/2), i.e.
# scale parameter 2 (variance 8) once normalized.
LAPLACE_SCALE = 2.0


@dataclass(frozen=True)
class MaternPrior:
    dim: int
    smoothness: float  # s
    cutoff: int  # K
    horizon: float  # T, drives the global rescaling
    mode_exponent: float | None = None
    time_exponent: float | None = None
    angular: bool = True
    amplitude: float = 1.0

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @property
    def _mode_exponent(self) -> float:
        if self.mode_exponent is not None:
            return self.mode_exponent
        return -(self.smoothness + 1.0) / 2.0

    @property
    def _time_exponent(self) -> float:
        if self.time_exponent is not None:
            return self.time_exponent
        return -self.dim / (4.0 * self.smoothness + 2.0 * self.dim)

    def horizon_scale(self) -> float:
        return float(self.horizon ** self._time_exponent)

    def base_mode_std(self) -> np.ndarray:
        """v_k without the horizon factor, over the canonical half lattice."""
        ks = canonical_frequencies(self.dim, self.cutoff)
        ksq = np.sum(ks.astype(np.float64) ** 2, axis=1)
        w = 4.0 * np.pi**2 if self.angular else 1.0
        return self.amplitude * (1.0 + w * ksq) ** self._mode_exponent

    def mode_std(self) -> np.ndarray:
        """Prior standard deviation v_k of each complex mode (v_0 = 0 implicitly)."""
        return self.base_mode_std() * self.horizon_scale()

    def coordinate_variances(self) -> np.ndarray:
        """Diagonal of the prior covariance over real cos/sin coordinates."""
        return np.repeat(self.mode_std() ** 2, 2)


def sample_matern(prior: MaternPrior, seed: int | None = None,
                  rng: np.random.Generator | None = None) -> FourierField:
    """Zero-mean field draw; deterministic given the seed.

    The base draw does not depend on the horizon, so two priors differing
    only in T produce draws that differ by exactly the ratio of their
    horizon scales.
    """
    if rng is None:
        rng = stream(0 if seed is None else seed)
    v = prior.base_mode_std()
    z = rng.standard_normal((v.size, 2))
    half = (v / np.sqrt(2.0)) * (z[:, 0] + 1j * z[:, 1]) * prior.horizon_scale()
    return FourierField(prior.dim, prior.cutoff, 0.0, half)


@dataclass(frozen=True)
class BesovLaplacePrior:
    dim: int
    smoothness: float  # s
    levels: int  # J, finest detail level included
    horizon: float

    def __post_init__(self):
        if self.levels < 0:
            raise ValueError("levels must be >= 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @classmethod
    def for_horizon(cls, dim: int, smoothness: float, horizon: float) -> "BesovLaplacePrior":
        """Truncation rule 2^J ~ T^(1/(2s+d))."""
        j = int(round(np.log2(horizon ** (1.0 / (2.0 * smoothness + dim)))))
        return cls(dim, smoothness, max(j, 0), horizon)

    def level_weight(self, level: int) -> float:
        return 2.0 ** (-level * (self.smoothness + 1.0 - self.dim / 2.0))

    def horizon_scale(self) -> float:
        return float(self.horizon ** (-self.dim / (2.0 * self.smoothness + self.dim)))

    @property
    def grid_resolution(self) -> int:
        return 2 ** (self.levels + 1)


def besov_coefficients(prior: BesovLaplacePrior, rng: np.random.Generator) -> dict:
    """Unweighted iid Laplace detail coefficients per level.

    Level l holds one array of shape (2^d - 1, 2^l, ..., 2^l): one block
    per nonzero tensor combination of scaling/wavelet factors.  The
    constant (approximation) coefficient is omitted: it is pinned to zero.
    """
    d = prior.dim
    out = {}
    for level in range(prior.levels + 1):
        shape = (2**d - 1,) + (2**level,) * d
        out[level] = rng.laplace(0.0, LAPLACE_SCALE, size=shape)
    return out


def _inverse_haar_step(approx: np.ndarray, details: np.ndarray) -> np.ndarray:
    """One synthesis level of the d-dimensional tensor Haar transform.

    approx: (2^l,)*d coefficients of the scaling functions at level l.
    details: (2^d - 1,) + (2^l,)*d, indexed by the nonzero epsilon masks
    in binary order (bit i of the mask = wavelet factor on axis i).
    Returns the approximation coefficients at level l + 1.
    """
    d = approx.ndim
    blocks = np.empty((2**d,) + approx.shape)
    blocks[0] = approx
    blocks[1:] = details
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for axis in range(d):
        # consecutive blocks differ exactly in the bit of the current axis
        a = blocks[0::2]
        c = blocks[1::2]
        even = (a + c) * inv_sqrt2
        odd = (a - c) * inv_sqrt2
        merged = np.stack([even, odd], axis=axis + 2)
        shape = list(a.shape)
        shape[axis + 1] *= 2
        blocks = merged.reshape(shape)
    return blocks[0]


def _synthesize_haar(prior: BesovLaplacePrior, coeffs: dict) -> np.ndarray:
    d = prior.dim
    approx = np.zeros((1,) * d)  # constant coefficient removed
    for level in range(prior.levels + 1):
        w = prior.level_weight(level)
        approx = _inverse_haar_step(approx, w * coeffs[level])
    n = approx.shape[0]
    # scaling functions at the final level have height 2^(Ld/2) = n^(d/2)
    return approx * float(n) ** (d / 2.0)


def sample_besov_laplace(prior: BesovLaplacePrior, seed: int | None = None,
                         rng: np.random.Generator | None = None) -> GridFunction:
    """Draw on the dyadic grid of resolution 2^(J+1); exact zero integral."""
    if rng is None:
        rng = stream(0 if seed is None else seed)
    coeffs = besov_coefficients(prior, rng)
    values = _synthesize_haar(prior, coeffs) * prior.horizon_scale()
    return GridFunction(prior.dim, prior.grid_resolution, values)
