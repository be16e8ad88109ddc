"""Real periodic scalar fields on the d-torus as truncated Fourier series.

A field is stored through the coefficients of its canonical half lattice
{k : |k|_inf <= K, k > 0 lexicographically}; the conjugate half is implied
by realness, so conjugate symmetry can never drift.  Frequencies use the
convention e_k(x) = exp(2*pi*i k.x), hence a real field is

    f(x) = c0 + 2 Re sum_{k canonical} c_k e_k(x).

Grid counterparts live on the regular lattice {0, 1/n, ..., (n-1)/n}^d and
integrals are lattice averages, which are exact for trigonometric
polynomials of per-axis degree < n.
"""

from __future__ import annotations

import csv
import functools
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FourierField",
    "GridFunction",
    "ResolutionError",
    "canonical_frequencies",
    "grid_points",
    "project_to_field",
    "save_field",
    "load_field",
]

FIELD_SCHEMA = "torusdiff.field.v1"


class ResolutionError(ValueError):
    """Grid too coarse for the requested spectral content."""


@functools.lru_cache(maxsize=64)
def canonical_frequencies(dim: int, cutoff: int) -> np.ndarray:
    """All k with |k|_inf <= cutoff whose first nonzero entry is positive.

    Returned in lexicographic order, shape (m_half, dim).  Together with
    their negatives and k=0 these enumerate the full cube.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    ks = []
    for k in itertools.product(range(-cutoff, cutoff + 1), repeat=dim):
        for kj in k:
            if kj > 0:
                ks.append(k)
                break
            if kj < 0:
                break
    ks.sort()
    out = np.array(ks, dtype=np.int64).reshape(len(ks), dim)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=64)
def grid_points(dim: int, n: int) -> np.ndarray:
    """Regular lattice {0, 1/n, ..., (n-1)/n}^d, shape (n^d, dim)."""
    axes = [np.arange(n) / n] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    pts.setflags(write=False)
    return pts


@dataclass(frozen=True)
class FourierField:
    """Real trigonometric polynomial on T^d with |k|_inf <= cutoff."""

    dim: int
    cutoff: int
    c0: float
    half: np.ndarray  # complex coefficients on the canonical half lattice

    def __post_init__(self):
        m = len(canonical_frequencies(self.dim, self.cutoff))
        half = np.asarray(self.half, dtype=np.complex128)
        if half.shape != (m,):
            raise ValueError(f"expected {m} canonical coefficients, got {half.shape}")
        half = half.copy()
        half.setflags(write=False)
        object.__setattr__(self, "half", half)
        object.__setattr__(self, "c0", float(self.c0))

    # -- construction ------------------------------------------------

    @classmethod
    def zero(cls, dim: int, cutoff: int) -> "FourierField":
        m = len(canonical_frequencies(dim, cutoff))
        return cls(dim, cutoff, 0.0, np.zeros(m, dtype=np.complex128))

    @classmethod
    def from_coeffs(cls, dim: int, cutoff: int, coeffs: dict) -> "FourierField":
        """Build from a {k tuple: complex} mapping.

        Either half of a +-k pair may be given (or both, consistently);
        realness is enforced by checking conjugate symmetry of the input.
        """
        ks = canonical_frequencies(dim, cutoff)
        index = {tuple(k): i for i, k in enumerate(ks)}
        half = np.zeros(len(ks), dtype=np.complex128)
        seen = {}
        c0 = 0.0
        for k, c in coeffs.items():
            k = tuple(int(v) for v in k)
            if len(k) != dim:
                raise ValueError(f"frequency {k} has wrong dimension, expected {dim}")
            if max(abs(v) for v in k) > cutoff:
                raise ValueError(f"frequency {k} outside cube of cutoff {cutoff}")
            if all(v == 0 for v in k):
                if abs(complex(c).imag) > 1e-12 * (1 + abs(c)):
                    raise ValueError("coefficient at k=0 must be real")
                c0 = complex(c).real
                continue
            canon = k if k in index else tuple(-v for v in k)
            if canon not in index:
                raise ValueError(f"frequency {k} outside cube of cutoff {cutoff}")
            val = complex(c) if canon == k else complex(c).conjugate()
            if canon in seen and not np.isclose(seen[canon], val, atol=1e-12):
                raise ValueError(f"conjugate symmetry violated at k={canon}")
            seen[canon] = val
            half[index[canon]] = val
        return cls(dim, cutoff, c0, half)

    # -- coefficient access -------------------------------------------

    @property
    def frequencies(self) -> np.ndarray:
        return canonical_frequencies(self.dim, self.cutoff)

    def coeff(self, k) -> complex:
        """Coefficient of e_k, for any |k|_inf <= cutoff."""
        k = tuple(int(v) for v in k)
        if all(v == 0 for v in k):
            return complex(self.c0)
        ks = self.frequencies
        index = {tuple(kk): i for i, kk in enumerate(ks)}
        if k in index:
            return complex(self.half[index[k]])
        neg = tuple(-v for v in k)
        if neg in index:
            return complex(self.half[index[neg]]).conjugate()
        raise KeyError(f"frequency {k} outside cube of cutoff {self.cutoff}")

    @property
    def zero_mean(self) -> bool:
        return self.c0 == 0.0

    def recentered(self) -> "FourierField":
        """Same field with the constant coefficient removed."""
        return FourierField(self.dim, self.cutoff, 0.0, self.half)

    # -- algebra -------------------------------------------------------

    def _aligned(self, other: "FourierField"):
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        cutoff = max(self.cutoff, other.cutoff)
        return self.with_cutoff(cutoff), other.with_cutoff(cutoff)

    def with_cutoff(self, cutoff: int) -> "FourierField":
        """Embed (or truncate) into the cube of the given cutoff."""
        if cutoff == self.cutoff:
            return self
        ks_new = canonical_frequencies(self.dim, cutoff)
        index = {tuple(k): i for i, k in enumerate(self.frequencies)}
        half = np.zeros(len(ks_new), dtype=np.complex128)
        for j, k in enumerate(ks_new):
            i = index.get(tuple(k))
            if i is not None:
                half[j] = self.half[i]
        return FourierField(self.dim, cutoff, self.c0, half)

    def __add__(self, other: "FourierField") -> "FourierField":
        a, b = self._aligned(other)
        return FourierField(a.dim, a.cutoff, a.c0 + b.c0, a.half + b.half)

    def __sub__(self, other: "FourierField") -> "FourierField":
        a, b = self._aligned(other)
        return FourierField(a.dim, a.cutoff, a.c0 - b.c0, a.half - b.half)

    def __mul__(self, scalar: float) -> "FourierField":
        return FourierField(self.dim, self.cutoff, scalar * self.c0, scalar * self.half)

    __rmul__ = __mul__

    def __neg__(self) -> "FourierField":
        return self * (-1.0)

    # -- evaluation ----------------------------------------------------

    def evaluate(self, x) -> np.ndarray:
        """Pointwise values at x of shape (..., dim); real output.

        Periodic by construction: evaluate(x) == evaluate(x + m) for
        integer m up to rounding in the phase products.
        """
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("evaluation point contains non-finite entries")
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[-1] != self.dim:
            raise ValueError(f"points must have last axis {self.dim}")
        phases = pts @ self.frequencies.T.astype(np.float64)
        vals = self.c0 + 2.0 * (np.exp(2j * np.pi * phases) @ self.half).real
        return vals[0] if scalar else vals.reshape(x.shape[:-1])

    def gradient(self) -> tuple["FourierField", ...]:
        """Partial derivatives as fields; coefficient map c_k -> 2*pi*i*k_i*c_k."""
        ks = self.frequencies
        return tuple(
            FourierField(self.dim, self.cutoff, 0.0, 2j * np.pi * ks[:, i] * self.half)
            for i in range(self.dim)
        )

    def gradient_at(self, x) -> np.ndarray:
        """Gradient values at x, shape (..., dim); one phase pass for all axes."""
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        ks = self.frequencies.astype(np.float64)
        phase = np.exp(2j * np.pi * (pts @ ks.T))  # (N, m_half)
        weighted = phase * self.half  # broadcast over modes
        out = 2.0 * (weighted @ (2j * np.pi * ks)).real
        return out[0] if scalar else out.reshape(x.shape[:-1] + (self.dim,))

    def to_grid(self, n: int) -> "GridFunction":
        if n < 2 * self.cutoff + 1:
            raise ResolutionError(
                f"resolution {n} < 2*cutoff+1 = {2 * self.cutoff + 1}; "
                "lattice would alias the top modes"
            )
        vals = self.evaluate(grid_points(self.dim, n))
        return GridFunction(self.dim, n, vals.reshape((n,) * self.dim))

    # -- norms -----------------------------------------------------------

    def sobolev_norm(self, s: float) -> float:
        """sqrt(sum_k (1 + 4 pi^2 |k|^2)^s |c_k|^2), H^s Sobolev norm."""
        ks = self.frequencies
        w = (1.0 + 4.0 * np.pi**2 * np.sum(ks * ks, axis=1)) ** s
        total = self.c0**2 + 2.0 * np.sum(w * np.abs(self.half) ** 2)
        return float(np.sqrt(total))

    def l2_norm(self) -> float:
        return self.sobolev_norm(0.0)


@dataclass(frozen=True)
class GridFunction:
    """Real values on the regular lattice; quadrature = lattice average."""

    dim: int
    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.n,) * self.dim:
            raise ValueError(f"expected shape {(self.n,) * self.dim}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def integrate(self) -> float:
        return float(np.mean(self.values))

    def __add__(self, other):
        other_vals = other.values if isinstance(other, GridFunction) else other
        return GridFunction(self.dim, self.n, self.values + other_vals)

    def __sub__(self, other):
        other_vals = other.values if isinstance(other, GridFunction) else other
        return GridFunction(self.dim, self.n, self.values - other_vals)

    def __mul__(self, other):
        other_vals = other.values if isinstance(other, GridFunction) else other
        return GridFunction(self.dim, self.n, self.values * other_vals)

    __rmul__ = __mul__


def integrate(g: GridFunction) -> float:
    return g.integrate()


def project_to_field(g: GridFunction, cutoff: int) -> FourierField:
    """L2 lattice projection of grid values onto modes |k|_inf <= cutoff.

    c_k = (1/n^d) sum_j values_j exp(-2 pi i k.x_j).  Exact whenever the
    grid data is a trigonometric polynomial of per-axis degree
    < n - cutoff (no aliasing onto the kept modes).
    """
    if g.n < 2 * cutoff + 1:
        raise ResolutionError(f"resolution {g.n} < 2*cutoff+1 = {2 * cutoff + 1}")
    pts = grid_points(g.dim, g.n)
    ks = canonical_frequencies(g.dim, cutoff)
    phase = np.exp(-2j * np.pi * (pts @ ks.T.astype(np.float64)))
    flat = g.values.ravel()
    half = (flat @ phase) / flat.size
    c0 = float(np.mean(flat))
    return FourierField(g.dim, cutoff, c0, half)


# -- serialization ------------------------------------------------------
#
# A field is stored as a flat list of (k-tuple, re, im) records covering
# the full cube |k|_inf <= cutoff in lexicographic order; the loader
# checks conjugate symmetry.  CSV columns: k1..kd, re, im.


def _full_records(f: FourierField):
    rows = []
    for k in itertools.product(range(-f.cutoff, f.cutoff + 1), repeat=f.dim):
        c = f.coeff(k)
        rows.append((k, c.real, c.imag))
    return rows


def save_field(f: FourierField, path: str) -> None:
    path = str(path)
    if path.endswith(".json"):
        payload = {
            "schema": FIELD_SCHEMA,
            "dim": f.dim,
            "cutoff": f.cutoff,
            "coeffs": [[list(k), re, im] for k, re, im in _full_records(f)],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(f"# {FIELD_SCHEMA} dim={f.dim} cutoff={f.cutoff}\n")
            writer = csv.writer(fh)
            writer.writerow([f"k{i + 1}" for i in range(f.dim)] + ["re", "im"])
            for k, re, im in _full_records(f):
                writer.writerow(list(k) + [repr(re), repr(im)])


def load_field(path: str) -> FourierField:
    path = str(path)
    coeffs = {}
    if path.endswith(".json"):
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("schema") != FIELD_SCHEMA:
            raise ValueError(f"unrecognized field schema in {path}")
        dim, cutoff = int(payload["dim"]), int(payload["cutoff"])
        for k, re, im in payload["coeffs"]:
            coeffs[tuple(int(v) for v in k)] = complex(re, im)
    else:
        with open(path) as fh:
            header = fh.readline()
            if FIELD_SCHEMA not in header:
                raise ValueError(f"unrecognized field schema in {path}")
            meta = dict(tok.split("=") for tok in header.split() if "=" in tok)
            dim, cutoff = int(meta["dim"]), int(meta["cutoff"])
            reader = csv.reader(fh)
            next(reader)  # column names
            for row in reader:
                k = tuple(int(v) for v in row[:dim])
                coeffs[k] = complex(float(row[dim]), float(row[dim + 1]))
    return FourierField.from_coeffs(dim, cutoff, coeffs)
