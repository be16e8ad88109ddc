"""Pure-Python Euler-Maruyama steppers.

Fallback used when the compiled extension torusdiff._em_core is not
available (or disabled via TORUSDIFF_PURE_PYTHON=1).  Operation order
matches the Cython kernels so both backends produce the same paths up to
last-ulp libm differences.
"""

from __future__ import annotations

import math

import numpy as np


def run_bump_em(x0, noise, dt, amps, scales, centers, out) -> int:
    n_steps, d = noise.shape
    nb = len(amps)
    x = [float(v) for v in x0]
    out[0, :] = x
    svec = [0.0] * d
    dvec = [0.0] * d
    for r in range(n_steps):
        g = [0.0] * d
        for b in range(nb):
            for i in range(d):
                u = x[i] - math.floor(x[i])
                s = scales[b][i]
                c = centers[b][i]
                sv = 0.0
                dv = 0.0
                for m in (-1, 0, 1):
                    t = s * (u + m - c)
                    e = math.exp(-t * t)
                    sv += e
                    dv += -2.0 * s * t * e
                svec[i] = sv
                dvec[i] = dv
            for i in range(d):
                t = amps[b] * dvec[i]
                for j in range(d):
                    if j != i:
                        t *= svec[j]
                g[i] += t
        for i in range(d):
            x[i] = x[i] + g[i] * dt + noise[r, i]
            out[r + 1, i] = x[i]
            if not math.isfinite(x[i]):
                return r
    return -1


def run_fourier_em(x0, noise, dt, freqs, cre, cim, out) -> int:
    n_steps, d = noise.shape
    nm = len(freqs)
    twopi = 2.0 * np.pi
    x = [float(v) for v in x0]
    out[0, :] = x
    for r in range(n_steps):
        g = [0.0] * d
        for j in range(nm):
            th = 0.0
            for i in range(d):
                th += freqs[j][i] * x[i]
            th *= twopi
            w = 2.0 * twopi * (-cim[j] * math.cos(th) - cre[j] * math.sin(th))
            for i in range(d):
                g[i] += w * freqs[j][i]
        for i in range(d):
            x[i] = x[i] + g[i] * dt + noise[r, i]
            out[r + 1, i] = x[i]
            if not math.isfinite(x[i]):
                return r
    return -1
