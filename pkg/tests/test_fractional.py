import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from lusinlab.exceptions import DomainError
from lusinlab.fractional import (
    FracOperator,
    apply_frac,
    jt_bound_check,
    kernel_abs_integral,
    kernel_abs_integral_with_error,
    kernel_K,
    maximal_fractional,
    representation_check,
    riesz_empirical,
    scalar_identity_check,
)
from lusinlab.gauss import GaussianSpace, HermiteFunction
from lusinlab.semigroup import SemigroupKind, apply_spectral, time_grid

STD1 = GaussianSpace([1.0])
FOUR_OVER_ROOT_PI = 4 / math.sqrt(math.pi)


class TestKernel:
    def test_zero_time(self):
        assert kernel_K(0.7, 0.0) == 0.0

    def test_negative_branch(self):
        assert kernel_K(0.5, 1.0) == pytest.approx(-0.7978846, abs=5e-8)
        assert kernel_K(0.5, 1.0) == pytest.approx(oracles.kernel_direct(0.5, 1.0), rel=1e-15)

    def test_positive_branch(self):
        value = kernel_K(2.0, 1.0)
        assert value == pytest.approx(oracles.kernel_direct(2.0, 1.0), rel=1e-15)
        assert value == pytest.approx((1 - 2**-0.5) / math.sqrt(math.pi), rel=1e-15)
        assert value > 0

    @pytest.mark.parametrize("s", [0.0, 1.0])
    def test_singular_points(self, s):
        with pytest.raises(DomainError):
            kernel_K(s, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 10.0), st.floats(1e-3, 0.999))
    def test_sign_pattern(self, t, frac):
        assert kernel_K(frac * t, t) < 0
        assert kernel_K(t / frac, t) > 0


class TestKernelMass:
    def test_zero(self):
        assert kernel_abs_integral(0.0) == 0.0

    @pytest.mark.parametrize("t,expected", [(1.0, 2.2567583), (4.0, 4.5135167)])
    def test_tabulated(self, t, expected):
        assert kernel_abs_integral(t) == pytest.approx(expected, abs=1e-7)

    @pytest.mark.parametrize("t", [1e-2, 1e-1, 1.0, 10.0, 1e2])
    def test_scaling(self, t):
        res = kernel_abs_integral_with_error(t)
        assert abs(res.value - FOUR_OVER_ROOT_PI * math.sqrt(t)) < 1e-6
        assert res.error >= 0


class TestScalarIdentity:
    def test_b_zero(self):
        res = scalar_identity_check(0.0, 2.0)
        assert res.lhs == 0.0 and res.rhs == 0.0

    def test_t_zero(self):
        res = scalar_identity_check(3.0, 0.0)
        assert res.lhs == 0.0 and abs(res.rhs) < 1e-14

    def test_unit(self):
        res = scalar_identity_check(1.0, 1.0)
        assert res.lhs == pytest.approx(-0.6321206, abs=5e-8)
        assert res.gap < 1e-8 and res.shift_gap < 1e-8

    def test_grid(self):
        for b in (0.0, 0.1, 1.0, 10.0):
            for t in (0.0, 0.1, 1.0, 10.0):
                res = scalar_identity_check(b, t)
                assert res.gap < 1e-8 and res.shift_gap < 1e-8

    def test_domain(self):
        with pytest.raises(DomainError):
            scalar_identity_check(-1.0, 1.0)


class TestFracOperator:
    def test_killed_constant(self):
        kind = SemigroupKind.wiener(STD1).killed_version
        f = HermiteFunction.constant(STD1, 1.0, 2)
        out = apply_frac(FracOperator.sqrt_one_minus_generator(kind.base), f)
        np.testing.assert_allclose(out.values, f.values)

    def test_h3_against_finite_difference_generator(self):
        kind = SemigroupKind.wiener(STD1)
        h3 = HermiteFunction.basis(STD1, (3,))
        root = apply_frac(FracOperator.sqrt_minus_generator(kind), h3)
        assert root.coefficient((3,)) == pytest.approx(math.sqrt(3))
        eps = 1e-6
        gen = (h3 - apply_spectral(kind, h3, eps)) / eps
        assert math.sqrt(gen.coefficient((3,))) == pytest.approx(math.sqrt(3), rel=1e-5)

    def test_da_prato_generator_finite_difference(self):
        sp = GaussianSpace([2.0])
        kind = SemigroupKind.da_prato(sp)
        x = HermiteFunction.linear(sp, [1.0])
        eps = 1e-7
        pts = np.linspace(-2, 2, 5)[:, None]
        gen = (x(pts) - apply_spectral(kind, x, eps)(pts)) / eps
        # -L x = x / (2 lam)
        np.testing.assert_allclose(gen, pts[:, 0] / 4.0, rtol=1e-6)

    def test_harmonic_constants(self):
        f = HermiteFunction.constant(STD1, 5.0, 1)
        out = apply_frac(FracOperator.sqrt_minus_generator(SemigroupKind.wiener(STD1)), f)
        assert not np.any(out.values)

    def test_multiplier_nonnegative(self):
        sp = GaussianSpace([0.3, 2.0])
        op = FracOperator(SemigroupKind.da_prato(sp), 1)
        f = HermiteFunction.random(sp, 4, np.random.default_rng(0))
        assert np.all(op.multiplier(f.indices) >= 1.0)


class TestRepresentation:
    def test_eigenfunction_reduces_to_scalar(self):
        kind = SemigroupKind.wiener(STD1)
        h2 = HermiteFunction.basis(STD1, (2,))
        x = 0.8
        t = 0.6
        rep = representation_check(kind, h2, t, x)
        scalar = scalar_identity_check(2.0, t)
        hx = h2(np.array([[x]]))[0]
        assert rep.lhs == pytest.approx(scalar.lhs * hx, abs=1e-14)
        assert rep.rhs == pytest.approx(scalar.rhs * hx, abs=1e-10)

    def test_zero_time(self):
        f = HermiteFunction.random(STD1, 4, np.random.default_rng(1))
        rep = representation_check(SemigroupKind.wiener(STD1), f, 0.0, 0.3)
        assert rep.lhs == 0.0 and abs(rep.rhs) < 1e-14

    def test_random_example(self):
        rng = np.random.default_rng(2)
        sp = GaussianSpace([0.5, 1.5])
        f = HermiteFunction.random(sp, 6, rng)
        x = rng.standard_normal(2)
        for kind in (SemigroupKind.da_prato(sp), SemigroupKind.wiener(sp).killed_version):
            assert representation_check(kind, f, 0.7, x).gap < 1e-6

    def test_single_point_only(self):
        with pytest.raises(ValueError):
            representation_check(SemigroupKind.wiener(STD1), HermiteFunction.basis(STD1, (1,)), 1.0,
                                 np.zeros((2, 1)))


class TestJt:
    def test_constant_closed_form(self):
        kind = SemigroupKind.wiener(STD1).killed_version
        f = HermiteFunction.constant(STD1, 2.0, 0)
        times = np.array([0.01, 0.5, 3.0])
        rep = jt_bound_check(kind, f, np.zeros((1, 1)), times)
        expected = (1 - np.exp(-times)) * math.sqrt(math.pi) / (4 * np.sqrt(times))
        np.testing.assert_allclose(rep.ratios[0], expected, rtol=1e-12)

    def test_h1(self):
        kind = SemigroupKind.wiener(STD1).killed_version
        rep = jt_bound_check(kind, HermiteFunction.basis(STD1, (1,)), np.array([[1.0]]), [1.0])
        assert rep.max_ratio < 1

    def test_small_time(self):
        kind = SemigroupKind.da_prato(STD1).killed_version
        f = HermiteFunction.random(STD1, 5, np.random.default_rng(3))
        rep = jt_bound_check(kind, f, np.array([[0.4]]), [1e-8])
        assert rep.max_ratio < 1e-3

    def test_requires_killed(self):
        with pytest.raises(ValueError):
            jt_bound_check(SemigroupKind.wiener(STD1), HermiteFunction.basis(STD1, (1,)), [[0.0]], [1.0])

    @pytest.mark.parametrize("maximal_over", ["killed", "base"])
    def test_random(self, maximal_over):
        rng = np.random.default_rng(4)
        sp = GaussianSpace([0.6, 1.7])
        f = HermiteFunction.random(sp, 5, rng)
        pts = rng.standard_normal((40, 2))
        for kind in (SemigroupKind.da_prato(sp), SemigroupKind.wiener(sp)):
            rep = jt_bound_check(kind.killed_version, f, pts, np.geomspace(1e-3, 10, 12),
                                 maximal_over=maximal_over)
            assert rep.max_ratio <= 1 + 1e-6

    def test_grid_refinement_never_decreases_sup(self):
        sp = GaussianSpace([1.0, 0.5])
        f = HermiteFunction.random(sp, 4, np.random.default_rng(5))
        pts = np.random.default_rng(6).standard_normal((10, 2))
        kind = SemigroupKind.wiener(sp).killed_version
        coarse = maximal_fractional(kind, f, pts, time_grid(16))
        fine = maximal_fractional(kind, f, pts, np.union1d(time_grid(16), time_grid(256)))
        assert np.all(fine >= coarse)


class TestRiesz:
    def test_constant(self):
        res = riesz_empirical(SemigroupKind.wiener(STD1), HermiteFunction.constant(STD1, -3.0, 0), 2.0)
        assert res.grad_norm == 0.0 and res.frac_norm == pytest.approx(3.0) and res.ratio == 0.0

    def test_wiener_factor_one(self):
        res = riesz_empirical(SemigroupKind.wiener(STD1), HermiteFunction.basis(STD1, (1,)), 2.0)
        assert res.spectral_energy == pytest.approx(1.0) and res.dirichlet_energy == pytest.approx(1.0)
        assert res.energy_factor == pytest.approx(1.0, abs=1e-12)

    def test_da_prato_factor_half(self):
        res = riesz_empirical(SemigroupKind.da_prato(STD1), HermiteFunction.linear(STD1, [1.0]), 2.0)
        assert res.spectral_energy == pytest.approx(0.5) and res.dirichlet_energy == pytest.approx(1.0)
        assert res.energy_factor == pytest.approx(0.5, abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_energy_factor_random(self, seed):
        rng = np.random.default_rng(seed)
        sp = GaussianSpace(rng.uniform(0.3, 3.0, int(rng.integers(1, 3))))
        f = HermiteFunction.random(sp, int(rng.integers(1, 6)), rng)
        assert riesz_empirical(SemigroupKind.wiener(sp), f, 2.0).energy_factor == pytest.approx(1.0, abs=1e-10)
        assert riesz_empirical(SemigroupKind.da_prato(sp), f, 2.0).energy_factor == pytest.approx(0.5, abs=1e-10)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_ratios_bounded(self, p):
        rng = np.random.default_rng(int(p * 10))
        ratios = []
        for _ in range(100):
            sp = GaussianSpace(rng.uniform(0.5, 2.0, 2))
            f = HermiteFunction.random(sp, int(rng.integers(1, 5)), rng)
            ratios.append(riesz_empirical(SemigroupKind.wiener(sp), f, p).ratio)
        ratios = np.array(ratios)
        assert np.all(np.isfinite(ratios))
        assert 0.05 < ratios.min() and ratios.max() < 5.0

    def test_p_validation(self):
        with pytest.raises(ValueError):
            riesz_empirical(SemigroupKind.wiener(STD1), HermiteFunction.basis(STD1, (1,)), 1.0)
