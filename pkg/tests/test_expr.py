"""
Tests for the integrand DSL, evaluation, differentiation and Laurent expansion
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elliptic_kernel import JetCapExceeded, half_periods, new_context, wp_value
from expr import (
    ATOM_WP,
    ATOM_ZHAT,
    EXPR_RING,
    Expr,
    ExprError,
    ExprSyntaxError,
    PoleHit,
    SelfDifference,
    UnknownSymbol,
    differentiate,
    evaluate,
    laurent_expand,
    parse,
    poles_in,
    render_expr,
)

ASSIGN = {1: 0.11 + 0.23j, 2: 0.47 + 0.71j, 3: 0.83 + 0.38j}


class TestParse:
    def test_product_of_three_atoms(self):
        E = parse("wp(1-2)*wp(2-3)*wp(3-1)")
        assert len(E) == 1
        term = E.terms[0]
        assert len(term.atoms) == 3
        # wp is even, so flipping 3-1 keeps the sign
        assert term.coeff == 1

    def test_parity_normalization(self):
        E = parse("Z(2-1)")
        term = E.terms[0]
        assert term.coeff == -1
        assert term.atoms[0].kind == ATOM_ZHAT
        assert (term.atoms[0].a, term.atoms[0].b) == (1, 2)

    def test_odd_derivative_flips(self):
        assert parse("wp'(2-1)") == -parse("wp'(1-2)")
        assert parse("wp''(2-1)") == parse("wp''(1-2)")

    def test_constants_stay_symbolic(self):
        E = parse("wp(1-2)^2 - (1/12)*g2")
        assert len(E) == 2
        g2_term = [t for t in E.terms if t.atoms[0].kind not in (ATOM_WP, ATOM_ZHAT)][0]
        assert g2_term.atoms[0].name == "g2"
        assert g2_term.coeff == pytest.approx(-1 / 12)

    def test_like_terms_merge(self):
        assert parse("wp(1-2) + wp(2-1)") == Expr.wp(0, 1, 2) * 2
        assert parse("Z(1-2) + Z(2-1)").is_zero

    def test_complex_literal_and_unary_minus(self):
        E = parse("-(0.5,-2)*eta1h")
        assert E.terms[0].coeff == complex(-0.5, 2)

    def test_whitespace_is_insignificant(self):
        assert parse(" wp ( 1 - 2 ) * g3 ") == parse("wp(1-2)*g3")

    def test_division_by_number(self):
        assert parse("g2/4") == Expr.const("g2") * 0.25

    @pytest.mark.parametrize("text,offset", [
        ("wp(1-2", 6),
        ("wp(1-2) +", 9),
        ("wp(1-2) $ 3", 8),
        ("wp(1-2)*", 8),
    ])
    def test_syntax_error_offsets(self, text, offset):
        with pytest.raises(ExprSyntaxError) as excinfo:
            parse(text)
        assert excinfo.value.offset == offset

    def test_non_ascii_character(self):
        with pytest.raises(ExprSyntaxError) as excinfo:
            parse("wp(1-2)·3")
        assert excinfo.value.offset == 7

    def test_division_by_atom_rejected(self):
        with pytest.raises(ExprSyntaxError):
            parse("g2/wp(1-2)")

    def test_unknown_symbol(self):
        with pytest.raises(UnknownSymbol) as excinfo:
            parse("wp(1-2) + foo")
        assert excinfo.value.symbol == "foo"
        assert excinfo.value.offset == 10

    def test_self_difference(self):
        with pytest.raises(SelfDifference):
            parse("wp(1-1)")

    def test_zero_point_rejected(self):
        with pytest.raises(ExprSyntaxError):
            parse("wp(0-1)")


class TestRender:
    @pytest.mark.parametrize("text", [
        "wp(1-2)*wp(2-3)*wp(3-1)",
        "-0.25*g2*eta1h + 0.1*g3",
        "wp'(1-3)*Z(2-3)^2 - (0.5,1.5)*G4",
        "3",
        "0",
    ])
    def test_round_trip(self, text):
        E = parse(text)
        assert parse(render_expr(E)) == E

    def test_powers_are_grouped(self):
        assert render_expr(parse("wp(1-2)*wp(2-1)")) == "wp(1-2)^2"


class TestEvaluate:
    def test_half_period(self, ctx_2i):
        value = parse("wp(1-2)").evaluate(ctx_2i, {1: 0.7, 2: 0.2})
        assert value == pytest.approx(half_periods(ctx_2i)[0], rel=1e-12)

    def test_zhat_half_period(self, ctx_2i):
        assert abs(parse("Z(1-2)").evaluate(ctx_2i, {1: 0.5, 2: 0})) < 1e-12

    def test_weierstrass_relation(self, ctx):
        E = parse("wp'(1-2)^2 - 4*wp(1-2)^3 + g2*wp(1-2) + g3")
        rng = np.random.default_rng(3)
        z1 = rng.uniform(0.1, 0.9, 50) + rng.uniform(0.1, 0.9, 50) * ctx.tau
        scale = np.abs(wp_value(ctx, z1)) ** 3 + 1
        values = evaluate(E, ctx, {1: z1, 2: 0})
        assert np.all(np.abs(values) < 1e-8 * scale)

    def test_parity_preserves_value(self, ctx):
        direct = wp_value(ctx, ASSIGN[2] - ASSIGN[1], 1)
        assert Expr.wp(1, 2, 1).evaluate(ctx, ASSIGN) == pytest.approx(direct, rel=1e-10)

    def test_constants_resolve_per_context(self, ctx_i, ctx_2i):
        E = parse("g2 + pi")
        assert E.evaluate(ctx_i, {}) == pytest.approx(ctx_i.constant("g2") + math.pi)
        assert E.evaluate(ctx_2i, {}) == pytest.approx(ctx_2i.constant("g2") + math.pi)

    def test_pole_hit(self, ctx_i):
        with pytest.raises(PoleHit) as excinfo:
            parse("wp(1-2)*Z(1-3)").evaluate(ctx_i, {1: 0.3, 2: 1.3, 3: 0.7j})
        assert excinfo.value.atom.kind == ATOM_WP

    def test_unassigned_point(self, ctx_i):
        with pytest.raises(ExprError):
            parse("wp(1-2)").evaluate(ctx_i, {1: 0.3})


class TestDifferentiate:
    def test_zhat_rules(self):
        eta = Expr.const("eta1h")
        assert differentiate(parse("Z(1-2)"), 1) == -Expr.wp(0, 1, 2) - eta
        assert differentiate(parse("Z(1-2)"), 2) == Expr.wp(0, 1, 2) + eta

    def test_leibniz(self):
        assert differentiate(parse("wp(1-2)^2"), 1) == parse("2*wp(1-2)*wp'(1-2)")

    def test_free_expression(self):
        assert differentiate(parse("wp(2-3) + g2"), 1).is_zero

    @settings(max_examples=50, derandomize=True, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(1, 3), st.integers(1, 3),
                              st.integers(0, 1), st.integers(1, 3), st.integers(1, 3)),
                    min_size=1, max_size=3))
    def test_matches_finite_differences(self, factors):
        ctx = new_context(1j)
        E = Expr.zero()
        for m, a, b, m2, c, d in factors:
            if a == b or c == d:
                continue
            E = E + Expr.wp(m, a, b) * Expr.wp(m2, c, d)
        h = 1e-5
        for p in (1, 2):
            dE = differentiate(E, p).evaluate(ctx, ASSIGN)
            plus = {**ASSIGN, p: ASSIGN[p] + h}
            minus = {**ASSIGN, p: ASSIGN[p] - h}
            fd = (E.evaluate(ctx, plus) - E.evaluate(ctx, minus)) / (2 * h)
            assert abs(dE - fd) <= 1e-4 * max(abs(fd), 1)


class TestPoles:
    def test_single_double_pole(self):
        assert poles_in(parse("wp(1-2)*wp(2-3)"), 1) == [(2, 2)]

    def test_two_poles(self):
        assert parse("wp(1-2)*wp(1-3)").poles_in(1) == [(2, 2), (3, 2)]

    def test_orders_add_within_a_term(self):
        assert poles_in(parse("wp'(1-2)*Z(1-2)"), 1) == [(2, 4)]

    def test_maximum_over_terms(self):
        assert poles_in(parse("wp(1-2) + Z(2-1)^3"), 2) == [(1, 3)]

    def test_never_under_reports(self, ctx_i):
        E = parse("wp'(1-2)*Z(1-2) + wp(1-2)*wp(1-3)")
        order = dict(poles_in(E, 1))[2]
        direction = np.exp(0.9j)
        for w in (1e-2, 1e-3, 1e-4):
            assign = {**ASSIGN, 1: ASSIGN[2] + w * direction}
            assert abs(E.evaluate(ctx_i, assign)) * w ** order < 10


class TestLaurentExpand:
    def test_zhat_taylor(self):
        series = laurent_expand(parse("Z(1-3)"), 1, 2, 1)
        assert series.coefficient(0) == Expr.zhat(2, 3)
        assert series.coefficient(1) == -Expr.wp(0, 2, 3) - Expr.const("eta1h")

    def test_wp_at_origin(self):
        series = laurent_expand(parse("wp(1-2)"), 1, 2, 4)
        assert series.lead_exponent == -2
        assert series.coefficient(-2) == Expr.scalar(1)
        assert series.coefficient(0).is_zero
        assert series.coefficient(2).is_close(Expr.const("G4") * 6)
        assert series.coefficient(4).is_close(Expr.const("G6") * 10)

    def test_subtrahend_side_has_same_series(self):
        assert laurent_expand(parse("wp(1-2)"), 2, 1, 3).coefficient(2).is_close(Expr.const("G4") * 6)
        zhat = laurent_expand(parse("Z(1-2)"), 2, 1, 1)
        assert zhat.coefficient(-1) == Expr.scalar(-1)

    def test_wp_taylor(self):
        series = laurent_expand(parse("wp(1-2)"), 1, 3, 1)
        assert series.coefficient(0) == Expr.wp(0, 2, 3)
        assert series.coefficient(1) == Expr.wp(1, 3, 2)

    def test_coefficients_use_ring(self):
        assert laurent_expand(parse("g2"), 1, 2, 2).ring is EXPR_RING

    def test_matches_displaced_evaluation(self, ctx_i):
        E = parse("wp(1-2)*wp(1-3) + 2*wp'(1-3)")
        order = 3
        series = laurent_expand(E, 1, 2, order)
        values = {k: c.evaluate(ctx_i, ASSIGN) for k, c in series.terms()}

        def error(w):
            approx = sum(c * w ** k for k, c in values.items())
            exact = E.evaluate(ctx_i, {**ASSIGN, 1: ASSIGN[2] + w})
            return abs(approx - exact)

        e1, e2 = error(0.04), error(0.02)
        assert e1 < 1
        # O(w^(order+1)) shrinks by about 2^4
        assert 8 < e1 / e2 < 32

    def test_jet_cap(self):
        with pytest.raises(JetCapExceeded):
            laurent_expand(parse("wp(1-3)"), 1, 2, 30, jet_cap=10)

    def test_self_expansion(self):
        with pytest.raises(SelfDifference):
            laurent_expand(parse("wp(1-3)"), 1, 1, 2)
