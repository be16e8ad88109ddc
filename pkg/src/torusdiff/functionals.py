"""Scalar functionals of the potential, their linearizations and remainders.

Supported kinds (q >= 2 integer, a / phi weight functions):

    linear_B   Psi(B) = int B a              psi = a - int a
    power_B    Psi(B) = int B^q              psi = q [B0^(q-1) - int B0^(q-1)]
    linear_mu  Psi(B) = int mu_B phi         psi = 2 mu0 [phi - int mu0 phi]
    entropy_mu Psi(B) = int mu_B log mu_B    psi = 2 mu0 [log mu0 - int mu0 log mu0]
    sqrt_mu    Psi(B) = int sqrt(mu_B)       psi = mu0 [mu0^(-1/2) - int sqrt(mu0)]
    power_mu   Psi(B) = int mu_B^q           psi = 2 mu0 [q mu0^(q-1) - q int mu0^q]

where mu_B = exp(2B) / int exp(2B) is the invariant density and mu0 is
its value at the expansion point B0.  The expansion is

    Psi(B) = Psi(B0) + <psi, B - B0>_2 + r(B, B0),

with <.,.>_2 evaluated by grid quadrature so that projection error in
psi does not contaminate the remainder.  For linear_B the remainder is
identically zero; for power_B with q = 2 it equals ||B - B0||_2^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FourierField, GridFunction, project_to_field

__all__ = [
    "FunctionalSpec",
    "InvariantMeasure",
    "invariant_measure",
    "evaluate_functional",
    "representor",
    "remainder",
    "inner_l2",
    "FUNCTIONAL_KINDS",
]

FUNCTIONAL_KINDS = ("linear_B", "power_B", "linear_mu", "entropy_mu", "sqrt_mu", "power_mu")


@dataclass(frozen=True)
class FunctionalSpec:
    kind: str
    q: int | None = None
    weight: FourierField | GridFunction | None = None

    def __post_init__(self):
        if self.kind not in FUNCTIONAL_KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind in ("power_B", "power_mu"):
            if self.q is None or int(self.q) < 2:
                raise ValueError(f"{self.kind} needs an integer exponent q >= 2")
            object.__setattr__(self, "q", int(self.q))
        if self.kind in ("linear_B", "linear_mu") and self.weight is None:
            raise ValueError(f"{self.kind} needs a weight function")

    @property
    def needs_measure(self) -> bool:
        return self.kind in ("linear_mu", "entropy_mu", "sqrt_mu", "power_mu")

    def label(self) -> str:
        if self.kind in ("power_B", "power_mu"):
            return f"{self.kind}[q={self.q}]"
        return self.kind

    @classmethod
    def from_dict(cls, payload: dict) -> "FunctionalSpec":
        """Parse {"kind": "power_B", "q": 4} style configuration entries."""
        payload = dict(payload)
        kind = payload.pop("kind")
        q = payload.pop("q", None)
        weight = payload.pop("weight", None)
        if isinstance(weight, dict):
            coeffs = {tuple(int(v) for v in k): complex(re, im)
                      for k, re, im in weight["coeffs"]}
            weight = FourierField.from_coeffs(int(weight["dim"]), int(weight["cutoff"]), coeffs)
        if payload:
            raise ValueError(f"unknown functional options: {sorted(payload)}")
        return cls(kind=kind, q=q, weight=weight)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.q is not None:
            out["q"] = self.q
        if isinstance(self.weight, FourierField):
            w = self.weight
            out["weight"] = {
                "dim": w.dim, "cutoff": w.cutoff,
                "coeffs": [[list(map(int, k)), float(w.coeff(k).real), float(w.coeff(k).imag)]
                           for k in map(tuple, w.frequencies)] + [[[0] * w.dim, w.c0, 0.0]],
            }
        return out


@dataclass(frozen=True)
class InvariantMeasure:
    """Normalized stationary density exp(2B)/Z on a grid (unit lattice mean)."""

    density: GridFunction

    def __post_init__(self):
        vals = self.density.values
        if np.any(vals <= 0):
            raise ValueError("invariant density must be strictly positive")
        total = float(np.mean(vals))
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"density not normalized: lattice mean {total}")


def _grid_values(B, n: int) -> np.ndarray:
    if isinstance(B, GridFunction):
        if B.n != n:
            raise ValueError(f"grid function has resolution {B.n}, expected {n}")
        return B.values
    return B.to_grid(n).values


def invariant_measure(B, n: int) -> InvariantMeasure:
    """mu_B = exp(2B)/int exp(2B), exponent-shifted against overflow.

    Adding constants to B leaves the measure unchanged.
    """
    vals = 2.0 * _grid_values(B, n)
    vals = np.exp(vals - np.max(vals))
    vals /= np.mean(vals)
    dim = B.dim if hasattr(B, "dim") else vals.ndim
    return InvariantMeasure(GridFunction(dim, n, vals))


def _measure_values(B, n: int) -> np.ndarray:
    return invariant_measure(B, n).density.values


def evaluate_functional(spec: FunctionalSpec, B, n: int = 64) -> float:
    """Grid quadrature of the defining integral at resolution n."""
    if spec.kind == "linear_B":
        return float(np.mean(_grid_values(B, n) * _grid_values(spec.weight, n)))
    if spec.kind == "power_B":
        return float(np.mean(_grid_values(B, n) ** spec.q))
    mu = _measure_values(B, n)
    if spec.kind == "linear_mu":
        return float(np.mean(mu * _grid_values(spec.weight, n)))
    if spec.kind == "entropy_mu":
        return float(np.mean(mu * np.log(mu)))
    if spec.kind == "sqrt_mu":
        return float(np.mean(np.sqrt(mu)))
    return float(np.mean(mu**spec.q))  # power_mu


def _representor_values(spec: FunctionalSpec, B0, n: int) -> np.ndarray:
    if spec.kind == "linear_B":
        a = _grid_values(spec.weight, n)
        return a - np.mean(a)
    if spec.kind == "power_B":
        b = _grid_values(B0, n) ** (spec.q - 1)
        return spec.q * (b - np.mean(b))
    mu = _measure_values(B0, n)
    if spec.kind == "linear_mu":
        phi = _grid_values(spec.weight, n)
        return 2.0 * mu * (phi - np.mean(mu * phi))
    if spec.kind == "entropy_mu":
        lg = np.log(mu)
        return 2.0 * mu * (lg - np.mean(mu * lg))
    if spec.kind == "sqrt_mu":
        rt = np.sqrt(mu)
        return mu * (1.0 / rt - np.mean(rt))
    q = spec.q  # power_mu
    return 2.0 * mu * (q * mu ** (q - 1) - q * np.mean(mu**q))


def representor(spec: FunctionalSpec, B0, n: int = 64,
                cutoff: int | None = None) -> FourierField:
    """Riesz representor psi of the linearization at B0, zero-mean.

    Built on the grid and projected onto modes |k|_inf <= cutoff
    (default: twice the cutoff of B0, or of the weight for linear_B).
    A linear_B spec with a Fourier weight is returned exactly.
    """
    if spec.kind == "linear_B" and isinstance(spec.weight, FourierField):
        return spec.weight.recentered()
    if cutoff is None:
        base = B0.cutoff if isinstance(B0, FourierField) else None
        if base is None and isinstance(spec.weight, FourierField):
            base = spec.weight.cutoff
        if base is None:
            raise ValueError("cutoff must be given for grid-valued inputs")
        cutoff = 2 * base
    dim = B0.dim if hasattr(B0, "dim") else np.asarray(B0).ndim
    vals = _representor_values(spec, B0, n)
    f = project_to_field(GridFunction(dim, n, vals), cutoff)
    return f.recentered()


def inner_l2(f, g, n: int = 64) -> float:
    """Grid-quadrature L2 inner product of two fields/grids."""
    return float(np.mean(_grid_values(f, n) * _grid_values(g, n)))


def remainder(spec: FunctionalSpec, B, B0, n: int = 64,
              psi: FourierField | None = None) -> float:
    """r(B, B0) = Psi(B) - Psi(B0) - <psi(B0), B - B0>_2."""
    if psi is None:
        psi = representor(spec, B0, n=n)
    linear = float(np.mean(_grid_values(psi, n)
                           * (_grid_values(B, n) - _grid_values(B0, n))))
    return evaluate_functional(spec, B, n) - evaluate_functional(spec, B0, n) - linear
