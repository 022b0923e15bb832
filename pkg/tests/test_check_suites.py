"""
Tests for the named check suites
"""

import numpy as np
import pytest

from check_suites import (
    PV_SIGN_CASES,
    SUITES,
    check_chain,
    check_contour,
    check_phi_plus,
    check_pv_agreement,
    check_single_wp,
    check_triangle,
    check_two_point,
    check_wp_powers,
    check_zhat_vanishing,
    random_expr,
    random_points,
    relative_error,
    run_kernel_suite,
    run_property_suite,
    run_suite,
)
from expr import parse, render_expr
from pv_oracle import periodic_distance


def failed(results):
    return [(r.name, r.rel_err, r.detail) for r in results if not r.passed]


class TestHelpers:
    def test_relative_error_is_absolute_near_zero(self):
        assert relative_error(1e-13, 0) == pytest.approx(1e-13)
        assert relative_error(2.0, 1.0) == pytest.approx(1.0)

    def test_random_points_are_separated(self, ctx_2i):
        rng = np.random.default_rng(1)
        points = random_points(ctx_2i, rng, [1, 2, 3], 0.3)
        assert sorted(points) == [1, 2, 3]
        for a in points:
            for b in points:
                if a < b:
                    assert float(periodic_distance(ctx_2i, points[a], points[b])) > 0.3

    def test_random_expr_round_trips(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            E = random_expr(rng, max_terms=4, max_atoms=3)
            assert parse(render_expr(E)) == E


class TestClosedFormChecks:
    @pytest.mark.parametrize("check", [
        check_single_wp,
        check_zhat_vanishing,
        check_wp_powers,
        check_two_point,
        check_chain,
        check_triangle,
        check_phi_plus,
    ])
    def test_closed_forms(self, ctx, check):
        results = check(ctx)
        assert results
        assert not failed(results)

    def test_names_carry_tau(self, ctx_2i):
        assert check_single_wp(ctx_2i)[0].name == "single_wp[0+2i]"

    def test_contour(self, ctx_i):
        assert not failed(check_contour(ctx_i))

    def test_pv_agreement_on_square_lattice(self, ctx_i):
        results = check_pv_agreement(ctx_i)
        assert len(results) == 3
        assert not failed(results)

    def test_pv_sign_case_off_square_lattice(self, ctx_2i):
        results = check_pv_agreement(ctx_2i, cases=PV_SIGN_CASES)
        assert [r.name for r in results] == ["pv_agreement[wp(1-2), tau=0+2i]"]
        assert abs(results[0].want) > 0.1
        assert not failed(results)


class TestSuites:
    def test_kernel_suite(self):
        results = run_kernel_suite([2j])
        assert len({r.name for r in results}) == len(results)
        assert not failed(results)

    def test_paper_suite(self):
        results = run_suite("paper", taus=[2j])
        assert any(r.name.startswith("pv_agreement") for r in results)
        assert not failed(results)

    def test_property_suite(self):
        results = run_property_suite(2j, cases=10)
        assert [r.name for r in results] == [
            "anchor_independence",
            "order_independence",
            "linearity",
            "residue_sum_zero",
            "parser_round_trip",
        ]
        assert not failed(results)

    def test_property_suite_is_deterministic(self):
        first = [r.got for r in run_property_suite(1j, cases=5)]
        second = [r.got for r in run_property_suite(1j, cases=5)]
        assert first == second

    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            run_suite("everything")
        assert "all" in SUITES
