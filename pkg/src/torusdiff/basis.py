"""Real orthonormal trigonometric basis on T^d.

For every canonical frequency k (see fields.canonical_frequencies) the
basis carries the pair

    phi_{2i}(x)   = sqrt(2) cos(2 pi k_i . x)
    phi_{2i+1}(x) = sqrt(2) sin(2 pi k_i . x)

which is orthonormal in L2(T^d) and spans the same space as the complex
exponentials {e_k : 0 < |k|_inf <= K}.  All posterior and Galerkin linear
algebra is real in these coordinates; the complex coefficients relate by
c_k = (beta_cos - i beta_sin) / sqrt(2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FourierField, canonical_frequencies, grid_points

__all__ = ["RealBasis"]

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class RealBasis:
    dim: int
    cutoff: int

    @property
    def canonical(self) -> np.ndarray:
        return canonical_frequencies(self.dim, self.cutoff)

    @property
    def size(self) -> int:
        """(2K+1)^d - 1 real coordinates."""
        return 2 * len(self.canonical)

    def frequency_norms_sq(self) -> np.ndarray:
        """|k|^2 per basis coordinate (each canonical k appears twice)."""
        ksq = np.sum(self.canonical.astype(np.float64) ** 2, axis=1)
        return np.repeat(ksq, 2)

    # -- pointwise evaluation ------------------------------------------

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Matrix of phi_j(x), shape (N, size)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        phases = 2.0 * np.pi * (pts @ self.canonical.T.astype(np.float64))
        out = np.empty((pts.shape[0], self.size))
        out[:, 0::2] = _SQRT2 * np.cos(phases)
        out[:, 1::2] = _SQRT2 * np.sin(phases)
        return out

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """Gradients grad phi_j(x), shape (N, size, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ks = self.canonical.astype(np.float64)
        phases = 2.0 * np.pi * (pts @ ks.T)
        sin = np.sin(phases)
        cos = np.cos(phases)
        out = np.empty((pts.shape[0], self.size, self.dim))
        # d/dx_i sqrt(2) cos(2 pi k.x) = -2 pi sqrt(2) k_i sin(2 pi k.x)
        out[:, 0::2, :] = (-2.0 * np.pi * _SQRT2) * sin[:, :, None] * ks[None, :, :]
        out[:, 1::2, :] = (2.0 * np.pi * _SQRT2) * cos[:, :, None] * ks[None, :, :]
        return out

    def grid_matrix(self, n: int) -> np.ndarray:
        """phi_j on the regular lattice, shape (n^dim, size)."""
        return self.evaluate(grid_points(self.dim, n))

    # -- coordinate maps ------------------------------------------------

    def to_field(self, coords: np.ndarray) -> FourierField:
        """Real coordinate vector -> zero-mean FourierField."""
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != (self.size,):
            raise ValueError(f"expected {self.size} coordinates, got {coords.shape}")
        half = (coords[0::2] - 1j * coords[1::2]) / _SQRT2
        return FourierField(self.dim, self.cutoff, 0.0, half)

    def from_field(self, f: FourierField) -> np.ndarray:
        """Coordinates of a field (its constant part is ignored)."""
        g = f.with_cutoff(self.cutoff) if f.cutoff != self.cutoff else f
        out = np.empty(self.size)
        out[0::2] = _SQRT2 * g.half.real
        out[1::2] = -_SQRT2 * g.half.imag
        return out

    def fields_from_coords(self, coords: np.ndarray) -> list[FourierField]:
        coords = np.atleast_2d(coords)
        return [self.to_field(row) for row in coords]
