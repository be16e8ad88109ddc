"""Elliptic solver: analytic inversion, manufactured solutions, estimator CLT."""

import numpy as np
import pytest

from torusdiff.fields import FourierField, GridFunction, grid_points, project_to_field
from torusdiff.functionals import FunctionalSpec, invariant_measure
from torusdiff.pde import assemble, efficient_estimator, efficient_variance, solve
from torusdiff.sde import GaussianBumpPotential, ground_truth, simulate


def uniform_weight(n=32):
    return GridFunction(2, n, np.ones((n, n)))


def cosine_mode(k=(1, 0)):
    """sqrt(2) cos(2 pi k.x) as a field."""
    return FourierField.from_coeffs(2, max(abs(v) for v in k), {k: np.sqrt(2) / 2})


def truth_measure(name, n=64):
    pot = ground_truth(name)
    vals = pot.value(grid_points(2, n)).reshape(n, n) - pot.mean_value()
    return invariant_measure(GridFunction(2, n, vals), n).density


class TestAssemble:
    def test_uniform_weight_diagonal(self):
        # Laplacian spectrum: S_jj = 4 pi^2 |k|^2 in the cos/sin basis
        op = assemble(uniform_weight(), 3)
        expected = 4 * np.pi**2 * op.basis.frequency_norms_sq()
        assert np.max(np.abs(op.stiffness - np.diag(expected))) < 1e-9

    def test_linearity_in_weight(self):
        mu = truth_measure("B1", 32)
        a = assemble(mu, 2).stiffness
        b = assemble(GridFunction(2, 32, 3.0 * mu.values), 2).stiffness
        assert np.allclose(b, 3.0 * a, rtol=1e-13)

    def test_symmetry_by_construction(self):
        op = assemble(truth_measure("B2", 32), 3)
        assert np.array_equal(op.stiffness, op.stiffness.T)

    def test_rejects_nonpositive_weight(self):
        vals = np.ones((16, 16))
        vals[0, 0] = 0.0
        with pytest.raises(ValueError):
            assemble(GridFunction(2, 16, vals), 2)


class TestSolve:
    def test_laplacian_inversion_analytic(self):
        # u = -psi / (4 pi^2 |k|^2), V = 1 / (4 pi^2 |k|^2)
        op = assemble(uniform_weight(), 4)
        for k, ksq in [((1, 0), 1), ((1, 1), 2), ((2, -1), 5)]:
            psi = cosine_mode(k)
            rep = solve(op, psi)
            expected_v = 1.0 / (4 * np.pi**2 * ksq)
            assert rep.variance == pytest.approx(expected_v, rel=1e-12)
            diff = rep.solution - psi * (-1.0 / (4 * np.pi**2 * ksq))
            assert np.max(np.abs(diff.half)) < 1e-12

    def test_zero_load(self):
        op = assemble(uniform_weight(), 3)
        rep = solve(op, FourierField.zero(2, 2))
        assert rep.variance == 0.0
        assert rep.solution.sobolev_norm(0) == 0.0

    def test_rejects_nonzero_mean_load(self):
        op = assemble(uniform_weight(), 2)
        with pytest.raises(ValueError):
            solve(op, FourierField.from_coeffs(2, 1, {(0, 0): 1.0}))

    def test_energy_identity(self):
        # V = |<psi, u>|: Galerkin orthogonality makes both sides the same
        # quadratic form up to solver rounding
        from torusdiff.functionals import inner_l2

        mu = truth_measure("B1", 64)
        psi = cosine_mode((1, 0))
        rep = solve(assemble(mu, 6), psi)
        inner = inner_l2(psi, rep.solution, n=64)
        assert inner < 0  # sign convention: u = -S^{-1} b
        assert abs(rep.variance - abs(inner)) < 1e-8 * rep.variance

    def test_variance_positive_for_nonzero_load(self):
        mu = truth_measure("B3", 64)
        rep = solve(assemble(mu, 4), cosine_mode((0, 1)))
        assert rep.variance > 0

    def test_refinement_monotone(self):
        # Rayleigh-Ritz: V is nondecreasing in the Galerkin cutoff
        mu = truth_measure("B1", 64)
        psi = cosine_mode((1, 0))
        vs = [solve(assemble(mu, kg), psi).variance for kg in (2, 4, 6, 8)]
        for lo, hi in zip(vs, vs[1:]):
            assert hi >= lo - 1e-10

    def test_variance_stable_under_refinement(self):
        mu = truth_measure("B1", 64)
        psi = cosine_mode((1, 0))
        v8 = solve(assemble(mu, 8), psi).variance
        v16 = solve(assemble(mu, 16, ), psi).variance
        assert abs(v16 - v8) / v8 < 0.01


class TestManufacturedSolution:
    def _setup(self, n=64):
        # target: a periodized off-center bump, recentered; the closed form
        # provides value, gradient and Laplacian independent of the solver
        target = GaussianBumpPotential(
            dim=2, amplitudes=np.array([1.0]),
            scales=np.array([[5.0, 5.0]]), centers=np.array([[0.37, 0.61]]))
        b0 = ground_truth("B1")
        pts = grid_points(2, n)
        mu_grid = invariant_measure(
            GridFunction(2, n, b0.value(pts).reshape(n, n) - b0.mean_value()), n).density
        mu = mu_grid.values.ravel()
        grad_b = b0.gradient(pts)
        grad_u = target.gradient(pts)
        lap_u = _bump_laplacian(target, pts)
        # A_mu u = mu (Lap u + 2 grad B . grad u), since grad mu = 2 mu grad B
        rhs = mu * (lap_u + 2.0 * np.sum(grad_b * grad_u, axis=1))
        rhs_field = project_to_field(GridFunction(2, n, rhs.reshape(n, n)), 15).recentered()
        ustar_vals = target.value(pts) - target.mean_value()
        return mu_grid, rhs_field, target, ustar_vals, pts

    def test_h1_convergence(self):
        mu_grid, rhs_field, target, ustar_vals, pts = self._setup()
        errs = {}
        for kg in (4, 8):
            rep = solve(assemble(mu_grid, kg), rhs_field)
            val_err = rep.solution.evaluate(pts) - ustar_vals
            grad_err = rep.solution.gradient_at(pts) - target.gradient(pts)
            errs[kg] = np.sqrt(np.mean(val_err**2) + np.mean(np.sum(grad_err**2, axis=1)))
        assert errs[4] / errs[8] >= 4.0
        assert errs[8] < 1e-3


def _bump_laplacian(pot, x):
    """Closed-form Laplacian of a periodized Gaussian-bump potential."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    u = pts - np.floor(pts)
    t = pot.scales[None, :, :, None] * (
        u[:, None, :, None] + np.array([-1.0, 0.0, 1.0]) - pot.centers[None, :, :, None])
    e = np.exp(-t * t)
    S = e.sum(axis=-1)
    D2 = ((4.0 * t * t - 2.0) * e).sum(axis=-1) * pot.scales[None, :, :] ** 2
    out = np.zeros(pts.shape[0])
    for i in range(pot.dim):
        others = np.prod(np.delete(S, i, axis=2), axis=2)
        out += (pot.amplitudes[None, :] * D2[:, :, i] * others).sum(axis=-1)
    return out


class TestEfficientVariance:
    def test_linear_functional_uniform_measure(self):
        # B0 = 0, a = sqrt(2) cos(2 pi x1): psi = a and V = 1/(4 pi^2)
        spec = FunctionalSpec("linear_B", weight=cosine_mode((1, 0)))
        rep = efficient_variance(FourierField.zero(2, 1), spec, galerkin_cutoff=4, n=32)
        assert rep.variance == pytest.approx(1.0 / (4 * np.pi**2), rel=1e-10)

    def test_zero_representor_gives_zero(self):
        rep = efficient_variance(FourierField.zero(2, 1), FunctionalSpec("power_B", q=2),
                                 galerkin_cutoff=4, n=32)
        assert rep.variance == 0.0


class TestEfficientEstimator:
    def test_zero_solution(self):
        traj = simulate(ground_truth("B1"), np.ones(2), 1.0, 1e-3, seed=0)
        value = efficient_estimator(traj, FourierField.zero(2, 1), 0.125)
        assert value == 0.125

    def test_clt_variance_and_mean(self):
        # moderate-scale version of the martingale CLT check: the rescaled
        # estimator error has mean ~ 0 and variance ~ V
        b0 = ground_truth("B1")
        spec = FunctionalSpec("linear_B", weight=cosine_mode((1, 0)))
        n = 64
        pts = grid_points(2, n)
        field0 = project_to_field(
            GridFunction(2, n, b0.value(pts).reshape(n, n) - b0.mean_value()), 8)
        rep = efficient_variance(field0, spec, galerkin_cutoff=8, n=n)
        horizon = 20.0
        reps = 60
        vals = []
        for i in range(reps):
            traj = simulate(b0, np.ones(2), horizon, 1e-3, seed=1000 + i)
            vals.append(efficient_estimator(traj, rep.solution, 0.0))
        z = np.sqrt(horizon) * np.asarray(vals)
        assert abs(np.mean(z)) < 3.0 * np.sqrt(rep.variance / reps)
        ratio = np.var(z, ddof=1) / rep.variance
        assert 0.6 < ratio < 1.6
