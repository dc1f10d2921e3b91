import math
import warnings

import numpy as np
import pytest

import oracles
from lusinlab.exceptions import FlowBlowUpError, HypothesisViolation
from lusinlab.flow import (
    FlowFieldSpec,
    compressibility_estimate,
    field_distance,
    flow_lusin_constant,
    integrate_flow,
    log_density_along,
    lr_stability_check,
    phi_functional,
    sobolev_norms,
    stability_check,
    w1p_time_norm,
)
from lusinlab.gauss import GaussianSpace, HermiteFunction, sample

STD2 = GaussianSpace([1.0, 1.0])


@pytest.fixture(scope="module")
def cloud():
    return sample(STD2, 4000, 0)


@pytest.fixture(scope="module")
def rotation_cp():
    return flow_lusin_constant(FlowFieldSpec.rotation(STD2), 2.0)


def _zero_field(space):
    return FlowFieldSpec.custom_hermite([HermiteFunction.constant(space, 0.0, 1)] * space.d)


class TestFieldSpec:
    def test_rotation_velocity(self):
        b = FlowFieldSpec.rotation(STD2, 2.0)
        np.testing.assert_allclose(b.velocity(0.0, np.array([[1.0, 0.0]])), [[0.0, 2.0]])
        assert b.measure_preserving and b.closed_form_flow

    def test_anisotropic_rotation_preserves_gaussian(self):
        sp = GaussianSpace([1.0, 0.25])
        b = FlowFieldSpec.rotation(sp, 1.0)
        E = b.exact_flow(0.7, np.eye(2))  # rows are images of basis vectors
        M = E.T
        np.testing.assert_allclose(M @ np.diag(sp.lam) @ M.T, np.diag(sp.lam), atol=1e-14)
        assert b.divergence(0.0, np.zeros((1, 2)))[0] == 0.0

    def test_flags(self):
        assert not FlowFieldSpec.shear(STD2, 0.3).measure_preserving
        shifted = FlowFieldSpec.perturbed_rotation(STD2, 1.0, 0.1, pattern="shift")
        assert not shifted.measure_preserving and shifted.closed_form_flow
        assert FlowFieldSpec.perturbed_rotation(STD2, 1.0, 0.1).measure_preserving
        assert not _zero_field(STD2).closed_form_flow

    def test_custom_jacobian_and_divergence(self):
        comps = [HermiteFunction.project(STD2, lambda x: x[:, 0] * x[:, 1], 2),
                 HermiteFunction.project(STD2, lambda x: -x[:, 1] ** 2, 2)]
        b = FlowFieldSpec.custom_hermite(comps, modulation=lambda t: 1.0 + t)
        x = np.array([[0.5, -1.0]])
        J = b.jacobian(1.0, x)[0]
        np.testing.assert_allclose(J, 2.0 * np.array([[-1.0, 0.5], [0.0, 2.0]]), atol=1e-12)
        assert b.divergence(1.0, x)[0] == pytest.approx(np.trace(J))

    def test_shift_exact_flow_solves_ode(self):
        b = FlowFieldSpec.perturbed_rotation(STD2, 1.0, 0.2, pattern="shift")
        x = np.array([[0.3, -0.8]])
        h = 1e-6
        deriv = (b.exact_flow(0.5 + h, x) - b.exact_flow(0.5 - h, x)) / (2 * h)
        np.testing.assert_allclose(deriv, b.velocity(0.5, b.exact_flow(0.5, x)), atol=1e-8)

    def test_unknown_pattern(self):
        with pytest.raises(ValueError):
            FlowFieldSpec.perturbed_rotation(STD2, 1.0, 0.1, pattern="twist")


class TestNorms:
    def test_rotation_norms(self):
        lp, jp = sobolev_norms(FlowFieldSpec.rotation(STD2), 2.0)
        assert lp == pytest.approx(math.sqrt(2.0), rel=1e-10)
        assert jp == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_cameron_martin_norms_isotropic_in_cm_coordinates(self):
        sp = GaussianSpace([1.0, 0.25])
        lp, jp = sobolev_norms(FlowFieldSpec.rotation(sp), 2.0, norm_mode="cameron_martin")
        assert lp == pytest.approx(math.sqrt(2.0), rel=1e-10)
        assert jp == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_time_norm_with_modulation(self):
        comps = [HermiteFunction.linear(STD2, [0.0, -1.0]), HermiteFunction.linear(STD2, [1.0, 0.0])]
        b = FlowFieldSpec.custom_hermite(comps, horizon=2.0, modulation=lambda t: t)
        assert w1p_time_norm(b, 2.0) == pytest.approx(2.0 * 2 * math.sqrt(2.0), rel=1e-10)


class TestFieldDistance:
    def test_identical(self):
        b = FlowFieldSpec.rotation(STD2)
        assert field_distance(b, b) == 0.0

    @pytest.mark.parametrize("eps", [0.1, 1e-3])
    def test_speed_perturbation(self, eps):
        b = FlowFieldSpec.rotation(STD2)
        bb = FlowFieldSpec.perturbed_rotation(STD2, 1.0, eps)
        assert field_distance(b, bb) == pytest.approx(eps * oracles.mean_abs_2d_standard(), rel=1e-10)

    def test_lp_homogeneity(self):
        b = FlowFieldSpec.shear(STD2, 0.3)
        d1 = field_distance(b, FlowFieldSpec.shear(STD2, 0.4), "Lp", p=3.0)
        d2 = field_distance(b, FlowFieldSpec.shear(STD2, 0.5), "Lp", p=3.0)
        assert d2 == pytest.approx(2 * d1, rel=1e-12)

    def test_mismatched_horizon(self):
        with pytest.raises(ValueError):
            field_distance(FlowFieldSpec.rotation(STD2, horizon=1.0), FlowFieldSpec.rotation(STD2, horizon=2.0))


class TestIntegrator:
    def test_zero_field(self):
        pts = sample(STD2, 100, 1)
        ens = integrate_flow(_zero_field(STD2), pts, 0.1)
        for k in range(ens.states.shape[0]):
            assert np.array_equal(ens.states[k], pts.points)

    def test_initial_state_exact(self, cloud):
        ens = integrate_flow(FlowFieldSpec.rotation(STD2), cloud, 0.01)
        assert np.array_equal(ens.states[0], cloud.points)
        assert ens.times[0] == 0.0 and ens.times[-1] == 1.0

    def test_rotation_accuracy(self, cloud):
        b = FlowFieldSpec.rotation(STD2)
        ens = integrate_flow(b, cloud, 1e-2)
        R = oracles.rotation(1.0)
        assert np.max(np.abs(ens.states[-1] - cloud.points @ R.T)) < 1e-7

    def test_rk4_order(self, cloud):
        b = FlowFieldSpec.rotation(STD2)
        errs = []
        for dt in (0.1, 0.05, 0.025):
            ens = integrate_flow(b, cloud, dt, n_saved=2)
            errs.append(np.max(np.abs(ens.states[-1] - b.exact_flow(1.0, cloud.points))))
        ratios = np.array(errs[:-1]) / np.array(errs[1:])
        np.testing.assert_allclose(ratios, 16.0, rtol=0.05)

    def test_euler_first_order(self, cloud):
        b = FlowFieldSpec.rotation(STD2)
        errs = [np.max(np.abs(integrate_flow(b, cloud, dt, "euler", n_saved=2).states[-1]
                              - b.exact_flow(1.0, cloud.points))) for dt in (0.01, 0.005)]
        assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)

    def test_group_property(self, cloud):
        b = FlowFieldSpec.shear(STD2, 0.7, horizon=1.0)
        ens = integrate_flow(b, cloud, 1 / 64, n_saved=65)
        half = FlowFieldSpec.shear(STD2, 0.7, horizon=0.5)
        twice = integrate_flow(half, integrate_flow(half, cloud, 1 / 64).states[-1], 1 / 64)
        np.testing.assert_allclose(twice.states[-1], ens.states[-1], atol=1e-12)

    def test_bad_step(self, cloud):
        with pytest.raises(ValueError):
            integrate_flow(FlowFieldSpec.rotation(STD2), cloud, 0.3)
        with pytest.raises(ValueError):
            integrate_flow(FlowFieldSpec.rotation(STD2), cloud, -0.1)

    def test_blow_up(self):
        comps = [HermiteFunction.project(STD2, lambda x: x[:, 0] ** 2, 2), HermiteFunction.constant(STD2, 0.0, 2)]
        b = FlowFieldSpec.custom_hermite(comps, horizon=2.0)
        with pytest.raises(FlowBlowUpError):
            integrate_flow(b, np.array([[3.0, 0.0]]), 0.01, bound=1e4)

    def test_rotation_preserves_moments(self, cloud):
        sp = GaussianSpace([1.0, 0.25])
        pts = sample(sp, 200_000, 4)
        ens = integrate_flow(FlowFieldSpec.rotation(sp), pts, 0.05, n_saved=2)
        cov = np.cov(ens.states[-1].T)
        np.testing.assert_allclose(np.diag(cov), sp.lam, rtol=0.02)
        assert abs(cov[0, 1]) < 0.01


class TestCompressibility:
    def test_rotation(self, cloud):
        b = FlowFieldSpec.rotation(STD2)
        res = compressibility_estimate(b, integrate_flow(b, cloud, 0.01))
        assert abs(res.L - 1.0) < 1e-6 and not res.at_boundary

    def test_anisotropic_rotation(self):
        sp = GaussianSpace([2.0, 0.3])
        b = FlowFieldSpec.rotation(sp)
        res = compressibility_estimate(b, integrate_flow(b, sample(sp, 2000, 1), 0.01))
        assert abs(res.L - 1.0) < 1e-6

    def test_zero_field(self, cloud):
        b = _zero_field(STD2)
        assert compressibility_estimate(b, integrate_flow(b, cloud, 0.1)).L == 1.0

    def test_shear_pointwise_density_against_histogram(self):
        a = 0.5
        b = FlowFieldSpec.shear(STD2, a)
        pts = sample(STD2, 10**6, 2)
        ens = integrate_flow(b, pts, 1 / 32, n_saved=2)
        u = np.exp(log_density_along(ens)[-1])
        centers, _, ratio, mass = oracles.pushforward_histogram(ens.states[-1], bins=40, extent=3.0)
        width = centers[1] - centers[0]
        ix = np.floor((ens.states[-1][:, 0] + 3.0) / width).astype(int)
        iy = np.floor((ens.states[-1][:, 1] + 3.0) / width).astype(int)
        # compare on well-populated cells only
        cells = [(i, j) for i in range(40) for j in range(40) if mass[i, j] * 10**6 > 2000]
        errs = []
        for i, j in cells:
            sel = (ix == i) & (iy == j)
            errs.append(abs(u[sel].mean() - ratio[i, j]) / ratio[i, j])
        assert np.median(errs) < 0.05

    def test_shear_ess_sup_warns_at_boundary(self):
        b = FlowFieldSpec.shear(STD2, 0.5)
        ens = integrate_flow(b, sample(STD2, 20_000, 3), 1 / 32)
        with pytest.warns(RuntimeWarning, match="edge of the cloud"):
            res = compressibility_estimate(b, ens)
        assert res.at_boundary and res.L > 1.0

    def test_lr_norm_closed_form(self):
        a = 0.3
        b = FlowFieldSpec.shear(STD2, a)
        ens = integrate_flow(b, sample(STD2, 400_000, 5), 1 / 32)
        res = compressibility_estimate(b, ens, r=2.0)
        assert res.L == pytest.approx(oracles.shear_lr_norm(a, 1.0, 2.0), rel=0.02)
        np.testing.assert_allclose(res.per_time[0], 1.0)

    def test_lr_increases_with_r(self):
        b = FlowFieldSpec.shear(STD2, 0.3)
        ens = integrate_flow(b, sample(STD2, 100_000, 6), 1 / 32)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            vals = [compressibility_estimate(b, ens, r).L for r in (1.5, 2.0, 3.0, 6.0, math.inf)]
        assert all(x <= y + 1e-12 for x, y in zip(vals, vals[1:]))


class TestPhi:
    def test_identical(self, cloud):
        ens = integrate_flow(FlowFieldSpec.rotation(STD2), cloud, 0.01)
        assert not np.any(phi_functional(ens, ens, 0.1))

    def test_rotation_pair_closed_form(self, cloud):
        eps = 0.1
        delta = eps * oracles.mean_abs_2d_standard()
        pts = sample(STD2, 200_000, 7)
        e1 = integrate_flow(FlowFieldSpec.rotation(STD2), pts, 1 / 64)
        e2 = integrate_flow(FlowFieldSpec.perturbed_rotation(STD2, 1.0, eps), pts, 1 / 64)
        phi = phi_functional(e1, e2, delta)
        assert phi[0] == 0.0
        for k in (16, 32, 64):
            assert phi[k] == pytest.approx(oracles.phi_rotation(e1.times[k], eps, delta), rel=0.01)
        assert np.all(np.diff(phi) >= 0)

    def test_delta_positive(self, cloud):
        ens = integrate_flow(FlowFieldSpec.rotation(STD2), cloud, 0.1)
        with pytest.raises(ValueError):
            phi_functional(ens, ens, 0.0)


class TestStability:
    def test_identical_fields(self, cloud, rotation_cp):
        b = FlowFieldSpec.rotation(STD2)
        rep = stability_check(b, b, 2.0, cloud, 0.01, cp=rotation_cp)
        assert rep.delta == 0.0 and not np.any(rep.lhs) and rep.passed

    def test_small_perturbation(self, cloud, rotation_cp):
        eps = 1e-3
        b = FlowFieldSpec.rotation(STD2)
        rep = stability_check(b, FlowFieldSpec.perturbed_rotation(STD2, 1.0, eps), 2.0, cloud, 0.01,
                              cp=rotation_cp)
        assert rep.delta == pytest.approx(eps * math.sqrt(math.pi / 2), rel=1e-10)
        assert rep.lhs[-1] == pytest.approx(oracles.lhs_rotation(1.0, eps), rel=0.03)
        assert rep.rhs == pytest.approx(rep.C / abs(math.log(rep.delta)))
        assert rep.lhs.max() < 0.01 * rep.rhs
        assert rep.passed and rep.C == pytest.approx(2 * rep.C1 + 1)

    def test_sweep(self, cloud, rotation_cp):
        b = FlowFieldSpec.rotation(STD2)
        ends = []
        for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
            rep = stability_check(b, FlowFieldSpec.perturbed_rotation(STD2, 1.0, eps), 2.0, cloud, 0.01,
                                  cp=rotation_cp)
            assert rep.passed and np.all(rep.lhs <= rep.rhs) and np.all(rep.phi <= rep.C1)
            assert rep.chebyshev.passed
            ends.append(rep.lhs[-1])
        assert np.all(np.diff(ends) < 0)

    def test_hypothesis_gate(self, cloud, rotation_cp):
        b = FlowFieldSpec.rotation(STD2)
        with pytest.raises(HypothesisViolation):
            stability_check(b, FlowFieldSpec.perturbed_rotation(STD2, 1.0, 1.0), 2.0, cloud, cp=rotation_cp)

    def test_cameron_martin_mode(self):
        sp = GaussianSpace([1.0, 0.25])
        pts = sample(sp, 4000, 8)
        b = FlowFieldSpec.rotation(sp)
        rep = stability_check(b, FlowFieldSpec.perturbed_rotation(sp, 1.0, 1e-2), 2.0, pts, 0.01,
                              norm_mode="cameron_martin")
        assert rep.norm_mode == "cameron_martin" and rep.passed
        assert rep.delta == pytest.approx(1e-2 * math.sqrt(math.pi / 2), rel=1e-10)
        assert rep.cp.variant == "wiener"

    def test_shift_perturbation(self, cloud, rotation_cp):
        b = FlowFieldSpec.rotation(STD2)
        bb = FlowFieldSpec.perturbed_rotation(STD2, 1.0, 1e-2, pattern="shift")
        rep = stability_check(b, bb, 2.0, cloud, 0.01, cp=rotation_cp)
        assert rep.delta == pytest.approx(1e-2, rel=1e-12) and rep.passed

    def test_lusin_constant_recorded(self, rotation_cp):
        assert rotation_cp.inflated == pytest.approx(2 * rotation_cp.raw * max(1.0, rotation_cp.weight_ratio))
        assert 0 < rotation_cp.raw <= 1.0 + 1e-12  # linear components


class TestLrStability:
    def test_measure_preserving_reduces(self, cloud, rotation_cp):
        b = FlowFieldSpec.rotation(STD2)
        bb = FlowFieldSpec.perturbed_rotation(STD2, 1.0, 1e-2)
        rep = lr_stability_check(b, bb, 2.0, 2.0, cloud, 0.01, cp=rotation_cp)
        assert rep.L == pytest.approx(1.0, abs=1e-9) and rep.L_bar == pytest.approx(1.0, abs=1e-9)
        assert rep.passed

    def test_shear_sweep(self, cloud):
        a = 0.3
        b = FlowFieldSpec.shear(STD2, a)
        cp = flow_lusin_constant(b, 2.0)
        for eps in (1e-1, 1e-2, 1e-3):
            rep = lr_stability_check(b, FlowFieldSpec.shear(STD2, a * (1 + eps)), 2.0, 2.0, cloud, 1 / 32, cp=cp)
            assert rep.passed
            assert rep.delta == pytest.approx(a * eps, rel=1e-10)

    def test_exponent_condition(self, cloud):
        b = FlowFieldSpec.shear(STD2, 0.3)
        with pytest.raises(ValueError):
            lr_stability_check(b, b, 2.0, 1.5, cloud)
        with pytest.raises(ValueError):
            lr_stability_check(b, b, 1.0, 2.0, cloud)
