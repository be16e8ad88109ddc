# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Euler-Maruyama steppers.

The drift must be re-evaluated at every step, so the integration loop is
inherently sequential and dominates runtime at small step sizes.  These
kernels mirror torusdiff._em_python exactly (same operation order) and
are selected automatically when the extension is importable.
"""

from libc.math cimport exp, floor, cos, sin, isfinite

import numpy as np


def run_bump_em(const double[::1] x0, const double[:, ::1] noise, double dt,
                const double[::1] amps, const double[:, ::1] scales,
                const double[:, ::1] centers, double[:, ::1] out):
    """Iterate x <- x + grad(B)(x) dt + noise_r for a Gaussian-bump potential.

    The potential is the periodization of sum_b a_b prod_i
    exp(-(s_bi (x_i - c_bi))^2); each axis factor sums the images
    m in {-1, 0, 1} of the wrapped coordinate.  Returns -1 on success or
    the index of the first step producing a non-finite state.
    """
    cdef Py_ssize_t n_steps = noise.shape[0]
    cdef Py_ssize_t d = x0.shape[0]
    cdef Py_ssize_t nb = amps.shape[0]
    cdef Py_ssize_t r, i, j, b, m
    cdef double u, t, e, s, c, sv, dv
    cdef double[8] x
    cdef double[8] g
    cdef double[8] svec
    cdef double[8] dvec

    if d > 8:
        raise ValueError("compiled stepper supports dim <= 8")

    for i in range(d):
        x[i] = x0[i]
        out[0, i] = x[i]

    for r in range(n_steps):
        for i in range(d):
            g[i] = 0.0
        for b in range(nb):
            for i in range(d):
                u = x[i] - floor(x[i])
                s = scales[b, i]
                c = centers[b, i]
                sv = 0.0
                dv = 0.0
                for m in range(-1, 2):
                    t = s * (u + m - c)
                    e = exp(-t * t)
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
            if not isfinite(x[i]):
                return r
    return -1


def run_fourier_em(const double[::1] x0, const double[:, ::1] noise, double dt,
                   const double[:, ::1] freqs, const double[::1] cre, const double[::1] cim,
                   double[:, ::1] out):
    """Same loop for a potential given by canonical Fourier coefficients.

    grad B(x)_i = 4 pi sum_j k_ji (-cim_j cos th_j - cre_j sin th_j),
    th_j = 2 pi k_j . x  (the conjugate half doubles the canonical sum).
    """
    cdef Py_ssize_t n_steps = noise.shape[0]
    cdef Py_ssize_t d = x0.shape[0]
    cdef Py_ssize_t nm = freqs.shape[0]
    cdef Py_ssize_t r, i, j
    cdef double th, w, twopi
    cdef double[8] x
    cdef double[8] g

    if d > 8:
        raise ValueError("compiled stepper supports dim <= 8")
    twopi = 2.0 * np.pi

    for i in range(d):
        x[i] = x0[i]
        out[0, i] = x[i]

    for r in range(n_steps):
        for i in range(d):
            g[i] = 0.0
        for j in range(nm):
            th = 0.0
            for i in range(d):
                th += freqs[j, i] * x[i]
            th *= twopi
            w = 2.0 * twopi * (-cim[j] * cos(th) - cre[j] * sin(th))
            for i in range(d):
                g[i] += w * freqs[j, i]
        for i in range(d):
            x[i] = x[i] + g[i] * dt + noise[r, i]
            out[r + 1, i] = x[i]
            if not isfinite(x[i]):
                return r
    return -1
