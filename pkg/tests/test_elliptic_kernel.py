"""
Tests for the q-series kernel: constants, theta, wp and Z-hat
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from elliptic_kernel import (
    CutoffTooSmall,
    JetCapExceeded,
    NonPositiveImaginaryPart,
    PoleAtLatticePoint,
    half_periods,
    lattice_eisenstein,
    new_context,
    reduce_to_fundamental,
    s_transform,
    theta_jet,
    theta_logder,
    weierstrass_zeta,
    wp_jet,
    wp_value,
    zhat_holo_jet,
    zhat_origin_coefficients,
    zhat_value,
)


def random_points(ctx, n=100, seed=7):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.1, 0.9, n) + rng.uniform(0.1, 0.9, n) * ctx.tau


class TestNewContext:
    def test_rejects_lower_half_plane(self):
        with pytest.raises(NonPositiveImaginaryPart):
            new_context(-1j)
        with pytest.raises(NonPositiveImaginaryPart):
            new_context(0.5 + 0j)

    def test_rejects_short_cutoff(self):
        with pytest.raises(CutoffTooSmall):
            new_context(0.05j)
        with pytest.raises(CutoffTooSmall):
            new_context(1j, series_cutoff=2)

    def test_explicit_zero_is_not_the_default(self):
        with pytest.raises(CutoffTooSmall):
            new_context(1j, series_cutoff=0)
        with pytest.raises(JetCapExceeded):
            new_context(1j, jet_cap=0)

    def test_stored_normalizations(self, ctx):
        c = ctx.constants
        assert c["g2"] == 120.0 * c["G4"]
        assert c["g3"] == 280.0 * c["G6"]
        assert c["eta1hat"] == pytest.approx(c["eta1"] - math.pi / ctx.im_tau, abs=1e-14)
        assert ctx.constant("eta1h") == c["eta1hat"]

    def test_square_lattice(self, ctx_i):
        assert abs(ctx_i.constants["E6"]) < 1e-12
        assert abs(ctx_i.constant("g3")) < 1e-10
        # Weight-2 lattice sum at tau = i is pi, so the completed value vanishes
        assert ctx_i.constants["eta1"] == pytest.approx(math.pi, rel=1e-12)
        assert abs(ctx_i.constant("eta1h")) < 1e-12

    def test_imaginary_tau_gives_real_invariants(self, ctx_2i):
        assert abs(ctx_2i.constant("g2").imag) < 1e-12
        assert abs(ctx_2i.constant("g3").imag) < 1e-12

    def test_hexagonal_lattice_has_no_g2(self):
        rho = complex(-0.5, math.sqrt(3) / 2)
        assert abs(new_context(rho).constant("g2")) < 1e-9

    def test_eisenstein_tower_extends_g4_g6(self, ctx):
        # G8 = 6 G4^2 / 7 with half lattice sums
        assert ctx.G(4) == pytest.approx(6 * ctx.G(2) ** 2 / 7, rel=1e-12)
        assert ctx.constant("G8") == ctx.G(4)

    def test_unknown_constant(self, ctx_i):
        with pytest.raises(KeyError):
            ctx_i.constant("g5")


class TestLatticeSums:
    @pytest.mark.parametrize("k,name", [(2, "G4"), (3, "G6")])
    def test_eisenstein_matches_lattice_sum(self, ctx, k, name):
        assert lattice_eisenstein(ctx.tau, k) / 2 == pytest.approx(ctx.constant(name), rel=1e-8, abs=1e-10)

    def test_weight_two_sum_is_eta1(self, ctx):
        assert lattice_eisenstein(ctx.tau, 1) == pytest.approx(ctx.constants["eta1"], rel=1e-8)

    def test_eta1_at_i_is_pi(self):
        assert lattice_eisenstein(1j, 1) == pytest.approx(math.pi, rel=1e-8)

    def test_modular_weight_of_g4(self, ctx):
        other = new_context(s_transform(ctx.tau))
        assert other.constant("G4") == pytest.approx(ctx.tau ** 4 * ctx.constant("G4"), rel=1e-9)


class TestTheta:
    def test_odd_at_zero(self, ctx):
        assert abs(theta_jet(ctx, 0, 4).coefficient(0)) < 1e-15
        assert abs(theta_jet(ctx, 0, 4).coefficient(2)) < 1e-12

    def test_critical_at_half(self, ctx):
        assert abs(theta_jet(ctx, 0.5, 2).coefficient(1)) < 1e-12

    def test_derivative_at_zero_is_dedekind_eta_cubed(self, ctx):
        n = np.arange(1, 200)
        eta = np.exp(2j * np.pi * ctx.tau / 24) * np.prod(1 - ctx.q ** n)
        assert theta_jet(ctx, 0, 1).coefficient(1) == pytest.approx(2 * np.pi * eta ** 3, rel=1e-12)

    def test_jet_matches_finite_differences(self, ctx_i):
        z, h = 0.3 + 0.4j, 1e-4
        jet = theta_jet(ctx_i, z, 2)
        f = [theta_jet(ctx_i, z + s * h, 0).coefficient(0) for s in (-1, 0, 1)]
        assert jet.coefficient(1) == pytest.approx((f[2] - f[0]) / (2 * h), rel=1e-6)
        assert jet.coefficient(2) == pytest.approx((f[2] - 2 * f[1] + f[0]) / h ** 2 / 2, rel=1e-5)

    def test_jet_cap(self, ctx_i):
        with pytest.raises(JetCapExceeded):
            theta_jet(ctx_i, 0.1, ctx_i.jet_cap + 1)


class TestWeierstrass:
    def test_weierstrass_relations(self, ctx):
        z = random_points(ctx)
        wp0, wp1, wp2 = wp_jet(ctx, z, 2)
        g2, g3 = ctx.constant("g2"), ctx.constant("g3")
        assert_allclose(wp1 ** 2, 4 * wp0 ** 3 - g2 * wp0 - g3, rtol=1e-8, atol=1e-8)
        assert_allclose(wp2, 6 * wp0 ** 2 - g2 / 2, rtol=1e-8, atol=1e-8)

    def test_relation_at_sample_point(self, ctx_2i):
        wp0, wp1 = wp_jet(ctx_2i, 0.29 + 0.31j, 1)
        g2, g3 = ctx_2i.constant("g2"), ctx_2i.constant("g3")
        assert wp1 ** 2 == pytest.approx(4 * wp0 ** 3 - g2 * wp0 - g3, rel=1e-9)

    def test_periodicity(self, ctx):
        z = random_points(ctx)
        base = wp_value(ctx, z)
        for period in (1, ctx.tau):
            shifted = wp_value(ctx, z + period)
            assert np.all(np.abs(shifted - base) < 1e-9 * (1 + np.abs(base)))

    def test_half_periods(self, ctx):
        assert abs(wp_value(ctx, 0.5, 1)) < 1e-10
        e1, e2, e3 = half_periods(ctx)
        assert abs(e1 + e2 + e3) < 1e-10 * max(abs(e1), 1)

    def test_derivative_matches_finite_difference(self, ctx_i):
        u, h = 0.21 + 0.37j, 1e-5
        wp0, wp1 = wp_jet(ctx_i, u, 1)
        fd = (wp_value(ctx_i, u + h) - wp_value(ctx_i, u - h)) / (2 * h)
        assert wp1 == pytest.approx(fd, rel=1e-6)

    def test_zeta_half_period(self, ctx):
        assert weierstrass_zeta(ctx, 0.5) == pytest.approx(ctx.constants["eta1"] / 2, rel=1e-10)

    def test_pole_at_lattice_point(self, ctx_i):
        with pytest.raises(PoleAtLatticePoint):
            wp_jet(ctx_i, 0, 0)
        with pytest.raises(PoleAtLatticePoint):
            wp_jet(ctx_i, 1 + ctx_i.tau, 2)

    def test_jet_cap(self, ctx_i):
        with pytest.raises(JetCapExceeded):
            wp_jet(ctx_i, 0.3, ctx_i.jet_cap + 1)

    def test_vectorized(self, ctx_i):
        z = np.array([0.2 + 0.1j, 0.4 + 0.6j])
        values = wp_value(ctx_i, z)
        assert values.shape == (2,)
        assert values[1] == pytest.approx(wp_value(ctx_i, complex(z[1])), rel=1e-12)


class TestZhat:
    def test_vanishes_at_half_periods(self, ctx):
        for z in (0.5, ctx.tau / 2, (1 + ctx.tau) / 2):
            assert abs(zhat_value(ctx, z)) < 1e-10

    def test_elliptic_and_odd(self, ctx):
        z = random_points(ctx)
        base = zhat_value(ctx, z)
        assert_allclose(zhat_value(ctx, z + 1), base, atol=1e-9)
        assert_allclose(zhat_value(ctx, z + ctx.tau), base, atol=1e-9)
        assert_allclose(zhat_value(ctx, -z), -base, atol=1e-9)

    def test_matches_zeta_form(self, ctx):
        z = 0.17 - 0.23j
        want = weierstrass_zeta(ctx, z) - ctx.constant("eta1h") * z - (math.pi / ctx.im_tau) * np.conj(z)
        assert zhat_value(ctx, z) == pytest.approx(want, rel=1e-12)

    def test_origin_coefficients(self, ctx):
        coeffs = zhat_origin_coefficients(ctx, 5)
        jet = zhat_holo_jet(ctx, 0, 5)
        assert jet.lead_exponent == -1
        assert jet.coefficient(-1) == 1
        assert jet.coefficient(1) == pytest.approx(-ctx.constant("eta1h"))
        assert jet.coefficient(3) == pytest.approx(-2 * ctx.constant("G4"))
        assert jet.coefficient(0) == 0 and jet.coefficient(2) == 0
        assert list(jet.coeffs) == coeffs

    def test_cubic_coefficient_by_circle_integral(self, ctx):
        w = 0.1 * np.exp(2j * np.pi * np.arange(64) / 64)
        coefficient = np.mean(theta_logder(ctx, w) * w ** -3)
        assert coefficient == pytest.approx(-2 * ctx.constant("G4"), rel=1e-9)

    @pytest.mark.parametrize("direction", [1, 1j, np.exp(0.7j)])
    def test_holo_jet_matches_finite_differences(self, ctx_i, direction):
        z, h = 0.31 + 0.22j, 1e-5
        jet = zhat_holo_jet(ctx_i, z, 2)
        step = h * direction
        fd = (zhat_value(ctx_i, z + step) - zhat_value(ctx_i, z - step)) / (2 * step)
        # the antiholomorphic part -pi conj(z)/im(tau) adds -pi/im(tau) * conj(step)/step
        fd += (math.pi / ctx_i.im_tau) * np.conj(step) / step
        assert jet.coefficient(0) == pytest.approx(zhat_value(ctx_i, z))
        assert jet.coefficient(1) == pytest.approx(fd, rel=1e-5)

    def test_pole(self, ctx_i):
        with pytest.raises(PoleAtLatticePoint):
            zhat_value(ctx_i, 1.0)


class TestReduce:
    def test_examples(self, ctx_2i):
        tau = ctx_2i.tau
        assert abs(reduce_to_fundamental(ctx_2i, 1 + tau)) < 1e-12
        assert reduce_to_fundamental(ctx_2i, 0.5) == pytest.approx(0.5)
        assert reduce_to_fundamental(ctx_2i, -0.25 + 1.75 * tau) == pytest.approx(0.75 + 0.75 * tau)

    def test_s_transform(self):
        assert s_transform(2j) == pytest.approx(0.5j)
