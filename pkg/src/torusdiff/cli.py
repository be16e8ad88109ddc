"""Command-line entry point.

Subcommands compose the pipeline stages; every command is a pure function
of its inputs plus a seed, logs progress to stderr, and writes
machine-readable results to files only.  Exit codes: 0 success, 1 runtime
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time

import numpy as np
import yaml

from . import __version__
from .basis import RealBasis
from .experiments import (
    DESK_PRESET,
    PAPER_PRESET,
    ExperimentConfig,
    bvm_diagnostic,
    emit_outputs,
    run_experiment,
)
from .fields import FourierField, GridFunction, load_field, save_field
from .functionals import FunctionalSpec, evaluate_functional, invariant_measure, representor
from .pde import assemble, efficient_estimator, efficient_variance, solve
from .posterior import conjugate_posterior, drift_vector, gram_matrix, sample_posterior
from .priors import MaternPrior
from .rng import stream
from .sde import ground_truth, load_trajectory, save_trajectory, simulate

PRESETS = {"desk": DESK_PRESET, "paper": PAPER_PRESET}


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _manifest(args_dict: dict) -> dict:
    canon = json.dumps(args_dict, sort_keys=True, default=str)
    return {
        "schema": "torusdiff.manifest.v1",
        "version": __version__,
        "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": args_dict,
    }


def _write_manifest(out_dir: str, args_dict: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(_manifest(args_dict), fh, indent=2, sort_keys=True)


def _potential(name: str, field_path: str | None):
    if name == "custom":
        if not field_path:
            raise SystemExit2("--field is required with --truth custom")
        return load_field(field_path)
    return ground_truth(name)


class SystemExit2(Exception):
    """Usage error surfaced with exit code 2."""


# -- subcommands ----------------------------------------------------------


def cmd_simulate(args) -> int:
    pot = _potential(args.truth, args.field)
    traj = simulate(pot, np.asarray(args.x0), args.T, args.dt, seed=args.seed)
    save_trajectory(traj, args.out)
    _log(f"wrote {traj.n_steps} steps to {args.out}")
    return 0


def _posterior_from_args(args, traj):
    basis = RealBasis(traj.dim, args.K)
    prior = MaternPrior(dim=traj.dim, smoothness=args.s, cutoff=args.K,
                        horizon=traj.horizon,
                        mode_exponent=args.prior_exponent,
                        time_exponent=args.prior_time_exponent,
                        angular=not args.prior_plain_weights,
                        amplitude=args.prior_amplitude)
    sigma = gram_matrix(traj, basis)
    drift = drift_vector(traj, basis)
    return conjugate_posterior(sigma, drift, prior.coordinate_variances(), basis)


def cmd_posterior(args) -> int:
    traj = load_trajectory(args.traj)
    post = _posterior_from_args(args, traj)
    os.makedirs(args.out_dir, exist_ok=True)
    mean_field = post.mean_field()
    save_field(mean_field, os.path.join(args.out_dir, "posterior_mean.json"))
    grid = mean_field.to_grid(args.grid)
    np.savetxt(os.path.join(args.out_dir, "posterior_mean_grid.csv"),
               grid.values, delimiter=",",
               header=f"torusdiff.grid.v1 n={args.grid}")
    np.savetxt(os.path.join(args.out_dir, "posterior_cov_diag.csv"),
               np.diag(post.covariance()), delimiter=",",
               header="torusdiff.covdiag.v1")
    _write_manifest(args.out_dir, {"command": "posterior", **vars(args)})
    _log(f"posterior over {post.size} coordinates written to {args.out_dir}")
    return 0


def cmd_functionals(args) -> int:
    traj = load_trajectory(args.traj)
    post = _posterior_from_args(args, traj)
    spec = FunctionalSpec.from_dict(json.loads(args.functional))
    fields = sample_posterior(post, args.M, seed=args.seed)
    values = [evaluate_functional(spec, f, n=args.grid) for f in fields]
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w") as fh:
        fh.write("# torusdiff.functional_samples.v1\n")
        fh.write("value\n")
        for v in values:
            fh.write(f"{v!r}\n")
    _log(f"{len(values)} posterior functional samples -> {args.out}")
    return 0


def cmd_efficiency(args) -> int:
    pot = _potential(args.truth, args.field)
    spec = FunctionalSpec.from_dict(json.loads(args.functional))
    report = efficient_variance(pot_to_field(pot, args.grid, args.K_psi), spec,
                                galerkin_cutoff=args.K_G, n=args.grid)
    payload = {"schema": "torusdiff.efficiency.v1", **report.to_dict(),
               "spec": spec.to_dict(), "truth": args.truth}
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    _log(f"V = {report.variance:.6g} (residual {report.residual:.3g}) -> {args.out}")
    return 0


def pot_to_field(pot, n: int, cutoff: int):
    """Closed-form potentials are projected for the spectral pipeline."""
    if isinstance(pot, FourierField):
        return pot.recentered()
    from .fields import grid_points, project_to_field

    vals = pot.value(grid_points(pot.dim, n)).reshape((n,) * pot.dim) - pot.mean_value()
    return project_to_field(GridFunction(pot.dim, n, vals), cutoff).recentered()


def cmd_experiment(args) -> int:
    if args.config:
        with open(args.config) as fh:
            payload = yaml.safe_load(fh)
        if not isinstance(payload, dict):
            raise SystemExit2(f"config file {args.config} must hold a mapping")
        base = payload.pop("preset", None)
        if base is not None and base not in PRESETS:
            raise SystemExit2(f"unknown preset {base!r}")
        merged = dataclasses.asdict(PRESETS[base]) if base else {}
        merged.update(payload)
        config = ExperimentConfig.from_dict(merged)
    else:
        config = PRESETS[args.preset]
    if args.out:
        config = dataclasses.replace(config, output_dir=args.out)
    if args.workers:
        config = dataclasses.replace(config, workers=args.workers)

    total_cells = len(config.truths) * len(config.horizons)
    _log(f"experiment: {total_cells} cells x {config.replications} replications")
    t0 = time.time()

    def progress(done, total):
        if done % 10 == 0 or done == total:
            _log(f"  replication {done}/{total} ({time.time() - t0:.0f}s)")

    report = run_experiment(config, progress=progress)
    paths = emit_outputs(report, config.output_dir)
    _write_manifest(config.output_dir, {"command": "experiment", **config.to_dict()})
    for cell in report.cells:
        _log(f"  {cell.truth} T={cell.horizon:g} {cell.functional}: "
             f"coverage={cell.coverage:.3f} length={cell.mean_length:.4g} "
             f"rmse={cell.rmse:.4g}" + ("" if cell.valid else "  INVALID"))
    _log(f"outputs: {', '.join(sorted(paths))} in {config.output_dir}")
    return 0 if report.all_valid else 1


def cmd_validate(args) -> int:
    """Quick analytic self-checks; exits nonzero on any failure."""
    failures = []

    def check(name, ok, detail=""):
        status = "ok" if ok else "FAIL"
        _log(f"  [{status}] {name}{': ' + detail if detail else ''}")
        if not ok:
            failures.append(name)

    # Laplacian inversion oracle: V = 1/(4 pi^2) for a unit cosine load
    n = 32
    ones = GridFunction(2, n, np.ones((n, n)))
    psi = FourierField.from_coeffs(2, 1, {(1, 0): np.sqrt(2) / 2})
    rep = solve(assemble(ones, 4), psi)
    expected = 1.0 / (4.0 * np.pi**2)
    check("elliptic solver analytic variance",
          abs(rep.variance - expected) < 1e-10 * expected,
          f"V={rep.variance:.9g}")

    # scalar conjugacy
    basis1 = RealBasis(1, 1)
    sigma = np.diag([3.0, 0.0]); sigma[1, 1] = 1e-12
    drift = np.array([1.5, 0.0])
    post = conjugate_posterior(sigma, drift, np.array([2.0, 2.0]), basis1)
    check("scalar conjugacy", abs(post.mean[0] - 1.5 / 3.5) < 1e-12)

    # ground-truth closed forms
    b1 = ground_truth("B1")
    check("ground truth B1 value",
          abs(b1.value(np.array([2 / 3, 2 / 3])) - (1 + np.exp(-12.5))) < 1e-12)

    # invariant measure normalization
    mu = invariant_measure(FourierField.from_coeffs(2, 1, {(1, 0): 0.3}), 32)
    check("invariant measure normalized", abs(mu.density.integrate() - 1.0) < 1e-12)

    # representor of the square functional is 2 B0
    B0 = FourierField.from_coeffs(2, 1, {(0, 1): 0.2 + 0.1j})
    psi2 = representor(FunctionalSpec("power_B", q=2), B0, n=32)
    check("square-functional representor",
          np.max(np.abs((psi2 - 2.0 * B0).half)) < 1e-12)

    _log(f"{'all checks passed' if not failures else f'{len(failures)} check(s) failed'}")
    return 0 if not failures else 1


# -- argument parsing -------------------------------------------------------


def _add_prior_args(p):
    p.add_argument("--K", type=int, default=3, help="Fourier cutoff of the basis")
    p.add_argument("--s", type=float, default=3.0, help="prior smoothness")
    p.add_argument("--prior-exponent", type=float, default=None,
                   help="override spectral exponent (default -(s+1)/2)")
    p.add_argument("--prior-time-exponent", type=float, default=None,
                   help="override horizon exponent (default -d/(4s+2d))")
    p.add_argument("--prior-plain-weights", action="store_true",
                   help="use (1+|k|^2) weights instead of (1+4pi^2|k|^2)")
    p.add_argument("--prior-amplitude", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=64, help="quadrature resolution")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusdiff",
        description="Reversible-diffusion Bayesian inference pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one diffusion path")
    p.add_argument("--truth", default="B1", choices=["B1", "B2", "B3", "custom"])
    p.add_argument("--field", help="Fourier field file for --truth custom")
    p.add_argument("--T", type=float, required=True, help="time horizon")
    p.add_argument("--dt", type=float, required=True, help="step size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x0", type=float, nargs="+", default=[1.0, 1.0])
    p.add_argument("--out", required=True, help=".npz or .csv trajectory file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("posterior", help="conjugate posterior from a trajectory")
    p.add_argument("--traj", required=True)
    _add_prior_args(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("functionals", help="posterior samples of a functional")
    p.add_argument("--traj", required=True)
    _add_prior_args(p)
    p.add_argument("--functional", required=True,
                   help='JSON spec, e.g. {"kind": "power_B", "q": 4}')
    p.add_argument("--M", type=int, default=1000, help="posterior sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_functionals)

    p = sub.add_parser("efficiency", help="efficiency bound via the elliptic solver")
    p.add_argument("--truth", default="B1", choices=["B1", "B2", "B3", "custom"])
    p.add_argument("--field", help="Fourier field file for --truth custom")
    p.add_argument("--functional", required=True)
    p.add_argument("--K-G", type=int, default=8, help="Galerkin cutoff")
    p.add_argument("--K-psi", type=int, default=8, help="representor cutoff")
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--out", required=True, help="JSON report path")
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("experiment", help="full replication study")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--config", help="YAML config (optionally with a preset key)")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--workers", type=int, default=0, help="parallel workers")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("validate", help="run analytic self-checks")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SystemExit2 as exc:
        _log(f"usage error: {exc}")
        return 2
    except (ValueError, FileNotFoundError, KeyError) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
