"""Functionals, invariant measure, representors and remainder orders."""

import numpy as np
import pytest
from scipy.special import i0

from torusdiff.fields import FourierField, canonical_frequencies
from torusdiff.functionals import (
    FUNCTIONAL_KINDS,
    FunctionalSpec,
    evaluate_functional,
    inner_l2,
    invariant_measure,
    remainder,
    representor,
)


def random_field(dim, cutoff, rng, scale=1.0):
    ks = canonical_frequencies(dim, cutoff)
    half = scale * (rng.standard_normal(len(ks)) + 1j * rng.standard_normal(len(ks)))
    return FourierField(dim, cutoff, 0.0, half)


def all_specs(rng):
    w = random_field(2, 2, rng, scale=0.3)
    return [
        FunctionalSpec("linear_B", weight=w),
        FunctionalSpec("power_B", q=2),
        FunctionalSpec("power_B", q=4),
        FunctionalSpec("linear_mu", weight=w),
        FunctionalSpec("entropy_mu"),
        FunctionalSpec("sqrt_mu"),
        FunctionalSpec("power_mu", q=3),
    ]


class TestInvariantMeasure:
    def test_uniform_for_zero_potential(self):
        mu = invariant_measure(FourierField.zero(2, 1), 16)
        assert np.allclose(mu.density.values, 1.0, atol=1e-14)

    def test_constant_shift_invariance(self):
        rng = np.random.default_rng(0)
        f = random_field(2, 2, rng, scale=0.4)
        g = FourierField(2, 2, 5.0, f.half)  # deliberately violates zero mean
        a = invariant_measure(f, 32).density.values
        b = invariant_measure(g, 32).density.values
        assert np.allclose(a, b, atol=1e-12)

    def test_bessel_oracle_1d(self):
        # B = cos(2 pi x)/2: mu(0) = e / I0(1)
        B = FourierField.from_coeffs(1, 1, {(1,): 0.25})
        mu = invariant_measure(B, 64)
        assert mu.density.values[0] == pytest.approx(np.e / i0(1.0), abs=1e-8)

    def test_normalization_and_positivity(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            f = random_field(2, 3, rng, scale=0.5)
            mu = invariant_measure(f, 64)
            assert mu.density.integrate() == pytest.approx(1.0, abs=1e-10)
            assert np.all(mu.density.values > 0)

    def test_overflow_guard(self):
        # 2B spans [-320, 320]: the raw exponential overflows, the shifted
        # one stays finite and positive
        f = FourierField.from_coeffs(2, 1, {(1, 0): 80.0})
        mu = invariant_measure(f, 16)
        assert np.all(np.isfinite(mu.density.values))
        assert np.all(mu.density.values > 0)

    def test_underflow_is_reported(self):
        # beyond double-precision range the density truly hits zero and the
        # positivity invariant fires rather than returning garbage
        f = FourierField.from_coeffs(2, 1, {(1, 0): 500.0})
        with pytest.raises(ValueError):
            invariant_measure(f, 16)


class TestEvaluate:
    def test_entropy_of_uniform_is_zero(self):
        assert evaluate_functional(FunctionalSpec("entropy_mu"),
                                   FourierField.zero(2, 1)) == pytest.approx(0.0, abs=1e-14)

    def test_sqrt_of_uniform_is_one(self):
        assert evaluate_functional(FunctionalSpec("sqrt_mu"),
                                   FourierField.zero(2, 1)) == pytest.approx(1.0, abs=1e-14)

    def test_square_of_cosine(self):
        f = FourierField.from_coeffs(2, 1, {(1, 0): 0.5})  # cos(2 pi x1)
        assert evaluate_functional(FunctionalSpec("power_B", q=2), f,
                                   n=16) == pytest.approx(0.5, abs=1e-14)

    def test_entropy_nonnegative(self):
        # KL divergence to the uniform law on the unit-volume torus
        rng = np.random.default_rng(2)
        for _ in range(10):
            f = random_field(2, 3, rng, scale=0.5)
            assert evaluate_functional(FunctionalSpec("entropy_mu"), f) >= -1e-12

    def test_sqrt_mu_at_most_one(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            f = random_field(2, 3, rng, scale=0.5)
            assert evaluate_functional(FunctionalSpec("sqrt_mu"), f) <= 1.0 + 1e-12


class TestRepresentor:
    def test_square_functional_at_zero(self):
        psi = representor(FunctionalSpec("power_B", q=2), FourierField.zero(2, 2))
        assert np.all(psi.half == 0)

    def test_square_functional_is_2B0(self):
        rng = np.random.default_rng(4)
        B0 = random_field(2, 2, rng, scale=0.3)
        psi = representor(FunctionalSpec("power_B", q=2), B0, n=32)
        assert np.max(np.abs((psi - 2.0 * B0).half)) < 1e-12

    def test_linear_mu_with_unit_weight(self):
        # phi = 1: psi = 2 mu (1 - int mu) = 0
        rng = np.random.default_rng(5)
        B0 = random_field(2, 2, rng, scale=0.3)
        one = FourierField.from_coeffs(2, 1, {(0, 0): 1.0})
        psi = representor(FunctionalSpec("linear_mu", weight=one), B0, n=32)
        assert psi.sobolev_norm(0) < 1e-12

    def test_linear_B_weight_recentered(self):
        rng = np.random.default_rng(6)
        w = FourierField(2, 2, 0.7, random_field(2, 2, rng).half)
        psi = representor(FunctionalSpec("linear_B", weight=w), FourierField.zero(2, 2))
        assert psi.c0 == 0.0
        assert np.array_equal(psi.half, w.half)

    def test_zero_mean_enforced(self):
        rng = np.random.default_rng(7)
        B0 = random_field(2, 2, rng, scale=0.4)
        for spec in all_specs(rng):
            assert representor(spec, B0, n=64).c0 == 0.0

    def test_directional_derivative_oracle(self):
        # (Psi(B0 + eps h) - Psi(B0 - eps h)) / 2 eps -> <psi, h> at O(eps^2)
        rng = np.random.default_rng(8)
        B0 = random_field(2, 2, rng, scale=0.3)
        h = random_field(2, 2, rng, scale=0.4)
        eps_grid = np.array([1e-2, 1e-3, 1e-4])
        for spec in all_specs(rng):
            psi = representor(spec, B0, n=64)
            inner = inner_l2(psi, h, n=64)
            errs = []
            for eps in eps_grid:
                cd = (evaluate_functional(spec, B0 + eps * h, 64)
                      - evaluate_functional(spec, B0 - eps * h, 64)) / (2 * eps)
                errs.append(abs(cd - inner))
            if spec.kind == "linear_B" or (spec.kind == "power_B" and spec.q == 2):
                # linear/quadratic: the central difference is exact
                assert max(errs) < 1e-10
            else:
                slope = np.polyfit(np.log(eps_grid), np.log(errs), 1)[0]
                assert 1.8 <= slope <= 2.2, f"{spec.label()}: slope {slope}"


class TestRemainder:
    def test_linear_B_remainder_vanishes(self):
        rng = np.random.default_rng(9)
        spec = FunctionalSpec("linear_B", weight=random_field(2, 2, rng))
        B0 = random_field(2, 2, rng, scale=0.3)
        B = random_field(2, 2, rng, scale=0.3)
        assert abs(remainder(spec, B, B0, n=32)) < 1e-12

    def test_square_remainder_is_squared_distance(self):
        rng = np.random.default_rng(10)
        spec = FunctionalSpec("power_B", q=2)
        B0 = random_field(2, 2, rng, scale=0.4)
        B = random_field(2, 2, rng, scale=0.4)
        diff = B - B0
        expected = inner_l2(diff, diff, n=32)
        assert remainder(spec, B, B0, n=32) == pytest.approx(expected, abs=1e-10)

    def test_quadratic_scaling_all_nonlinear_kinds(self):
        # |r(B0 + t h, B0)| ~ t^2: log-log slope within [1.8, 2.2]
        # small t keeps the cubic term out of the fit: sqrt_mu's quadratic
        # coefficient is ~20x smaller than its cubic one
        rng = np.random.default_rng(11)
        B0 = random_field(2, 2, rng, scale=0.3)
        h = random_field(2, 2, rng, scale=0.4)
        ts = np.array([0.003, 0.001, 0.0003])
        for spec in all_specs(rng):
            if spec.kind == "linear_B":
                continue
            psi = representor(spec, B0, n=64)
            rs = np.array([abs(remainder(spec, B0 + t * h, B0, n=64, psi=psi))
                           for t in ts])
            slope = np.polyfit(np.log(ts), np.log(rs), 1)[0]
            assert 1.8 <= slope <= 2.2, f"{spec.label()}: slope {slope}"
            # ratio r / t^2 stays bounded and stable
            ratios = rs / ts**2
            assert ratios.max() < 10 * ratios.min()


class TestSpecParsing:
    def test_from_dict_roundtrip(self):
        spec = FunctionalSpec.from_dict({"kind": "power_B", "q": 4})
        assert spec.label() == "power_B[q=4]"
        assert FunctionalSpec.from_dict(spec.to_dict()) == spec

    def test_weight_roundtrip(self):
        w = FourierField.from_coeffs(2, 1, {(1, 0): 0.5 - 0.25j, (0, 0): 0.2})
        spec = FunctionalSpec("linear_mu", weight=w)
        back = FunctionalSpec.from_dict(spec.to_dict())
        assert np.allclose(back.weight.half, w.half)
        assert back.weight.c0 == pytest.approx(0.2)

    def test_invalid_kind(self):
        with pytest.raises(ValueError):
            FunctionalSpec("cubic_mu")

    def test_power_requires_q(self):
        with pytest.raises(ValueError):
            FunctionalSpec("power_B")
        with pytest.raises(ValueError):
            FunctionalSpec("power_mu", q=1)

    def test_all_kinds_enumerated(self):
        assert set(FUNCTIONAL_KINDS) == {
            "linear_B", "power_B", "linear_mu", "entropy_mu", "sqrt_mu", "power_mu"}
