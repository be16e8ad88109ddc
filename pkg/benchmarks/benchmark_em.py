#!/usr/bin/env python3
"""Compare the compiled Euler-Maruyama stepper against the Python fallback.

Usage: python benchmarks/benchmark_em.py [--steps N] [--repeat R]

The integration loop is the only part of the pipeline that cannot be
vectorized (each step depends on the previous state), which is why it is
the one compiled kernel in the package.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from torusdiff import _em_python
from torusdiff.fields import FourierField, canonical_frequencies
from torusdiff.rng import stream
from torusdiff.sde import ground_truth

try:
    from torusdiff import _em_core
except ImportError:
    _em_core = None


def time_stepper(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_bumps(n_steps, repeat):
    pot = ground_truth("B3")  # four bumps, the heaviest truth
    dt = 1e-3
    noise = np.sqrt(dt) * stream(1).standard_normal((n_steps, 2))
    out = np.empty((n_steps + 1, 2))
    x0 = np.array([1.0, 1.0])
    args = (x0, noise, dt, pot.amplitudes, pot.scales, pot.centers, out)
    results = {"python": time_stepper(_em_python.run_bump_em, args, repeat)}
    if _em_core is not None:
        results["cython"] = time_stepper(_em_core.run_bump_em, args, repeat)
    return results


def bench_fourier(n_steps, repeat, cutoff=3):
    rng = stream(2)
    ks = canonical_frequencies(2, cutoff)
    half = 0.05 * (rng.standard_normal(len(ks)) + 1j * rng.standard_normal(len(ks)))
    f = FourierField(2, cutoff, 0.0, half)
    dt = 1e-3
    noise = np.sqrt(dt) * stream(3).standard_normal((n_steps, 2))
    out = np.empty((n_steps + 1, 2))
    freqs = np.ascontiguousarray(f.frequencies, dtype=np.float64)
    args = (np.array([0.5, 0.5]), noise, dt, freqs,
            np.ascontiguousarray(f.half.real), np.ascontiguousarray(f.half.imag), out)
    results = {"python": time_stepper(_em_python.run_fourier_em, args, repeat)}
    if _em_core is not None:
        results["cython"] = time_stepper(_em_core.run_fourier_em, args, repeat)
    return results


def report(name, n_steps, results):
    print(f"{name} ({n_steps} steps):")
    for backend, seconds in results.items():
        rate = n_steps / seconds / 1e6
        print(f"  {backend:7s} {seconds * 1e3:9.2f} ms   {rate:8.2f} Msteps/s")
    if "cython" in results:
        print(f"  speedup {results['python'] / results['cython']:.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if _em_core is None:
        print("note: compiled extension not available, timing fallback only")
    report("gaussian-bump drift (B3)", args.steps, bench_bumps(args.steps, args.repeat))
    report("fourier drift (K=3)", args.steps, bench_fourier(args.steps, args.repeat))


if __name__ == "__main__":
    main()
