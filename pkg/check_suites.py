"""
Named regression and property checks behind `ellreg check`

Suites:
    paper       closed-form values of single and iterated integrals, oracle agreement
    kernel      Weierstrass relations, Zhat symmetries, lattice-sum constants
    properties  randomized anchor/order independence, linearity, residue sums, round trips
    all         everything above
"""

import itertools
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

import config
from elliptic_kernel import (
    ModularContext,
    half_periods,
    lattice_eisenstein,
    new_context,
    s_transform,
    theta_logder,
    weierstrass_zeta,
    wp_jet,
    zhat_value,
)
from expr import Expr, evaluate, parse, render_expr
from logger import log_check_result, log_info
from pv_oracle import (
    PvOptions,
    a_cycle_relation,
    compare,
    contour_contact_check,
    periodic_distance,
    pv_single_step,
)
from regint_core import (
    choose_anchor,
    integrate_all,
    integrate_once,
    integration_step,
    polar_decomposition,
)

# Minimum torus distance between points in property cases
PROPERTY_SEPARATION = 0.3


@dataclass
class CheckResult:
    """Outcome of one named check"""
    name: str
    passed: bool
    got: complex
    want: complex
    rel_err: float
    detail: str = ""


def relative_error(got: complex, want: complex) -> float:
    """|got - want| / |want|, absolute when want vanishes"""
    scale = abs(want) if abs(want) > 1e-12 else 1.0
    return float(abs(complex(got) - complex(want)) / scale)


def make_result(name: str, got: complex, want: complex, tol: float, detail: str = "",
                rel_err: Optional[float] = None) -> CheckResult:
    err = relative_error(got, want) if rel_err is None else rel_err
    result = CheckResult(name=name, passed=bool(err < tol), got=complex(got), want=complex(want),
                         rel_err=err, detail=detail)
    log_check_result(name, result.passed, err)
    return result


def tau_label(tau: complex) -> str:
    return f"{tau.real:g}{tau.imag:+g}i"


def random_points(ctx: ModularContext, rng: np.random.Generator, points: Sequence[int],
                  min_separation: float = 0.15) -> Dict[int, complex]:
    """Points of the fundamental domain, pairwise separated on the torus"""
    while True:
        s, t = rng.random(len(points)), rng.random(len(points))
        values = s + t * ctx.tau
        ok = all(float(periodic_distance(ctx, values[i], values[j])) > min_separation
                 for i in range(len(points)) for j in range(i + 1, len(points)))
        if ok:
            return {p: complex(v) for p, v in zip(points, values)}


# ---------------------------------------------------------------------------
# Closed-form suite
# ---------------------------------------------------------------------------

def check_single_wp(ctx: ModularContext) -> List[CheckResult]:
    got = integrate_all(parse("wp(1-2)"), [1, 2], ctx)
    return [make_result(f"single_wp[{tau_label(ctx.tau)}]", got, -ctx.constant("eta1h"), 1e-10)]


def check_zhat_vanishing(ctx: ModularContext) -> List[CheckResult]:
    got = integrate_all(parse("Z(1-2)"), [1, 2], ctx)
    return [make_result(f"zhat_vanishing[{tau_label(ctx.tau)}]", got, 0, 1e-10)]


def wp_cubed_closed_form(ctx: ModularContext) -> complex:
    eta, g2, g3 = ctx.constant("eta1h"), ctx.constant("g2"), ctx.constant("g3")
    return -0.15 * eta * g2 + 0.1 * g3


def check_wp_powers(ctx: ModularContext) -> List[CheckResult]:
    label = tau_label(ctx.tau)
    squared = integrate_all(parse("wp(1-2)^2"), [1, 2], ctx)
    cubed = integrate_all(parse("wp(1-2)^3"), [1, 2], ctx)
    return [
        make_result(f"wp_squared[{label}]", squared, ctx.constant("g2") / 12, 1e-9),
        make_result(f"wp_cubed[{label}]", cubed, wp_cubed_closed_form(ctx), 1e-9),
    ]


def _two_point_closed_form(ctx: ModularContext, z12: complex) -> complex:
    wp0, wp1, wp2 = wp_jet(ctx, z12, 2)
    eta = ctx.constant("eta1h")
    zhat = zhat_value(ctx, z12)
    return wp1 * zhat + wp0 * (-wp0 - eta) + 0.5 * wp2 - eta * wp0


def _phi0_closed_form(ctx: ModularContext, z12: complex) -> complex:
    wp0, wp1 = wp_jet(ctx, z12, 1)
    eta = ctx.constant("eta1h")
    return -wp1 * zhat_value(ctx, -z12) + 2 * wp0 ** 2 - 0.25 * ctx.constant("g2") - 2 * eta * wp0


def check_two_point(ctx: ModularContext, n_points: int = config.CHECK_RANDOM_POINTS,
                    seed: int = config.CHECK_SEED) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    result = integrate_once(parse("wp(1-3)*wp(2-3)"), 3)
    worst_engine, worst_split = (0.0, 0j, 0j), (0.0, 0j, 0j)
    for _ in range(n_points):
        assign = random_points(ctx, rng, [1, 2])
        z12 = assign[1] - assign[2]
        got = evaluate(result, ctx, assign)
        want = _two_point_closed_form(ctx, z12)
        split = _phi0_closed_form(ctx, z12)
        err = relative_error(got, want)
        if err >= worst_engine[0]:
            worst_engine = (err, got, want)
        err = relative_error(split, got)
        if err >= worst_split[0]:
            worst_split = (err, split, got)

    label = tau_label(ctx.tau)
    return [
        make_result(f"two_point_correlator[{label}]", worst_engine[1], worst_engine[2], 1e-8,
                    f"worst of {n_points} random pairs", worst_engine[0]),
        make_result(f"phi0_splitting[{label}]", worst_split[1], worst_split[2], 1e-8,
                    f"worst of {n_points} random pairs", worst_split[0]),
    ]


def _all_orders(F: Expr, ctx: ModularContext, want: complex, name: str, tol: float) -> CheckResult:
    worst = (0.0, want)
    for order in itertools.permutations(sorted(F.points)):
        got = integrate_all(F, list(order), ctx)
        err = relative_error(got, want)
        if err >= worst[0]:
            worst = (err, got)
    return make_result(name, worst[1], want, tol, "worst of all integration orders", worst[0])


def check_chain(ctx: ModularContext, seed: int = config.CHECK_SEED) -> List[CheckResult]:
    label = tau_label(ctx.tau)
    F = parse("wp(1-2)*wp(2-3)")
    eta = ctx.constant("eta1h")
    results = [_all_orders(F, ctx, eta ** 2, f"chain_n3[{label}]", 1e-9)]

    first = integration_step(F, 1).result
    expected = Expr.const("eta1h") * Expr.wp(0, 2, 3) * -1
    assign = random_points(ctx, np.random.default_rng(seed), [2, 3])
    results.append(CheckResult(
        name=f"chain_n3_trace[{label}]",
        passed=first.is_close(expected),
        got=complex(evaluate(first, ctx, assign)),
        want=complex(evaluate(expected, ctx, assign)),
        rel_err=relative_error(evaluate(first, ctx, assign), evaluate(expected, ctx, assign)),
        detail=render_expr(first),
    ))
    log_check_result(results[-1].name, results[-1].passed, results[-1].rel_err)
    return results


def check_triangle(ctx: ModularContext) -> List[CheckResult]:
    label = tau_label(ctx.tau)
    eta, g2, g3 = ctx.constant("eta1h"), ctx.constant("g2"), ctx.constant("g3")
    want = 0.25 * g3 - 0.25 * g2 * eta
    other_form = 70 * ctx.constant("G6") - 60 * eta * ctx.constant("G4") + 0.25 * g2 * eta
    return [
        _all_orders(parse("wp(1-2)*wp(2-3)*wp(3-1)"), ctx, want, f"triangle_n3[{label}]", 1e-9),
        make_result(f"triangle_identity[{label}]", other_form, want, 1e-8),
    ]


def check_phi_plus(ctx: ModularContext, n_points: int = config.CHECK_RANDOM_POINTS,
                   seed: int = config.CHECK_SEED) -> List[CheckResult]:
    F = parse("wp'(1-2)*(Z(3-1) - Z(3-2))")
    rng = np.random.default_rng(seed + 1)
    assignments = [random_points(ctx, rng, [1, 2]) for _ in range(n_points)]
    results = []
    for anchor in (1, 2):
        reduced = integrate_once(F, 3, anchor)
        worst = (0.0, 0j)
        for assign in assignments:
            got = evaluate(reduced, ctx, assign)
            scale = max(1.0, abs(wp_jet(ctx, assign[1] - assign[2], 1)[1]))
            err = abs(got) / scale
            if err >= worst[0]:
                worst = (err, got)
        results.append(make_result(f"phi_plus_vanishing[{tau_label(ctx.tau)},anchor={anchor}]",
                                   worst[1], 0, 1e-9, "scaled by |wp'(z1-z2)|", worst[0]))
    return results


PV_CASES = [
    ("wp(1-2)", 1, {2: 0.3 + 0.4j}),
    ("wp(1-2)^2", 1, {2: 0.3 + 0.4j}),
    ("wp(1-3)*wp(2-3)", 3, {1: 0.13 + 0.21j, 2: 0.57 + 0.89j}),
]

# -eta1h vanishes at tau = i, so the single wp case is repeated where it does not
PV_SIGN_CASES = PV_CASES[:1]
PV_SIGN_TAU = 2j


def check_pv_agreement(ctx: ModularContext, opts: Optional[PvOptions] = None,
                       cases: Sequence[tuple] = PV_CASES) -> List[CheckResult]:
    results = []
    for text, active, assign in cases:
        F = parse(text)
        engine = complex(evaluate(integrate_once(F, active), ctx, assign))
        report = pv_single_step(F, active, assign, ctx, opts)
        verdict = compare(engine, report, config.PV_TOLERANCE)
        result = CheckResult(
            name=f"pv_agreement[{text}, tau={tau_label(ctx.tau)}]",
            passed=verdict.passed,
            got=report.value,
            want=engine,
            rel_err=verdict.deviation,
            detail=f"error estimate {report.extrapolated_error:.3g}; {verdict.reason}".rstrip("; "),
        )
        log_check_result(result.name, result.passed, result.rel_err)
        results.append(result)
    return results


def check_contour(ctx: ModularContext) -> List[CheckResult]:
    label = tau_label(ctx.tau)
    eta1 = lattice_eisenstein(ctx.tau, 1)
    got = contour_contact_check(parse("wp(1-2)"), 1, {2: 0.3 + 0.4j}, ctx)
    zhat = contour_contact_check(parse("Z(1-2)"), 1, {2: 0.3 + 0.4j}, ctx)
    return [
        make_result(f"eta1_lattice_sum[{label}]", eta1, ctx.constant("eta1"), 1e-8),
        make_result(f"contour_formula[{label}]", got, -ctx.constant("eta1h"), 1e-6),
        make_result(f"contour_zhat[{label}]", zhat, 0, 1e-6),
    ]


MODULARITY_PAIRS = [2j, 1 + 1j]


def check_modularity(pairs: Sequence[complex] = MODULARITY_PAIRS) -> List[CheckResult]:
    F = parse("wp(1-2)^3")
    results = []
    for tau in pairs:
        tau = complex(tau)
        value = integrate_all(F, [1, 2], new_context(tau))
        transformed = integrate_all(F, [1, 2], new_context(s_transform(tau)))
        results.append(make_result(f"modularity_weight6[{tau_label(tau)}]", transformed, tau ** 6 * value, 1e-8))
    return results


# ---------------------------------------------------------------------------
# Kernel suite
# ---------------------------------------------------------------------------

def check_weierstrass_relation(ctx: ModularContext, seed: int = config.CHECK_SEED) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    z = rng.random(config.CHECK_RANDOM_POINTS) * 0.8 + 0.1 + (rng.random(config.CHECK_RANDOM_POINTS) * 0.8 + 0.1) * ctx.tau
    wp0, wp1 = wp_jet(ctx, z, 1)
    g2, g3 = ctx.constant("g2"), ctx.constant("g3")
    residual = wp1 ** 2 - 4 * wp0 ** 3 + g2 * wp0 + g3
    scale = np.maximum(np.abs(wp1) ** 2, 1.0)
    err = float(np.max(np.abs(residual) / scale))
    worst = int(np.argmax(np.abs(residual) / scale))
    return [make_result(f"weierstrass_relation[{tau_label(ctx.tau)}]", residual[worst], 0, 1e-8,
                        "wp'^2 - 4 wp^3 + g2 wp + g3", err)]


def check_zhat_symmetries(ctx: ModularContext, seed: int = config.CHECK_SEED) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    z = rng.random(config.CHECK_RANDOM_POINTS) * 0.8 + 0.1 + (rng.random(config.CHECK_RANDOM_POINTS) * 0.8 + 0.1) * ctx.tau
    base = zhat_value(ctx, z)
    label = tau_label(ctx.tau)
    scale = np.maximum(np.abs(base), 1.0)

    def worst(other):
        errs = np.abs(other - base) / scale
        i = int(np.argmax(errs))
        return other[i], base[i], float(errs[i])

    results = []
    for name, shifted in (("zhat_period_1", zhat_value(ctx, z + 1)),
                          ("zhat_period_tau", zhat_value(ctx, z + ctx.tau)),
                          ("zhat_odd", -zhat_value(ctx, -z))):
        got, want, err = worst(shifted)
        results.append(make_result(f"{name}[{label}]", got, want, 1e-8, rel_err=err))
    return results


def check_zhat_coefficient(ctx: ModularContext, radius: float = 0.1, nodes: int = 64) -> List[CheckResult]:
    """w^3 coefficient of the holomorphic part of Zhat at 0 by a circle integral of theta'/theta"""
    theta = 2 * np.pi * np.arange(nodes) / nodes
    w = radius * np.exp(1j * theta)
    coefficient = np.mean(theta_logder(ctx, w) * w ** -3)
    return [make_result(f"zhat_cubic_coefficient[{tau_label(ctx.tau)}]", coefficient, -2 * ctx.constant("G4"), 1e-8)]


def check_half_periods(ctx: ModularContext) -> List[CheckResult]:
    label = tau_label(ctx.tau)
    e1, e2, e3 = half_periods(ctx)
    scale = max(abs(e1), abs(e2), abs(e3))
    zeta_half = weierstrass_zeta(ctx, 0.5)
    return [
        make_result(f"half_period_sum[{label}]", e1 + e2 + e3, 0, 1e-8, rel_err=abs(e1 + e2 + e3) / scale),
        make_result(f"zeta_half_period[{label}]", zeta_half, ctx.constant("eta1") / 2, 1e-8),
    ]


def check_lattice_constants(ctx: ModularContext) -> List[CheckResult]:
    label = tau_label(ctx.tau)
    return [
        make_result(f"G4_lattice_sum[{label}]", lattice_eisenstein(ctx.tau, 2) / 2, ctx.constant("G4"), 1e-8),
        make_result(f"G6_lattice_sum[{label}]", lattice_eisenstein(ctx.tau, 3) / 2, ctx.constant("G6"), 1e-8),
    ]


def check_a_cycle(ctx: ModularContext) -> List[CheckResult]:
    got = a_cycle_relation(parse("wp(1-2)"), 1, {2: 0.3 + 0.4j}, ctx)
    return [make_result(f"relation_a_cycle[{tau_label(ctx.tau)}]", got, -ctx.constant("eta1h"), 1e-8)]


def check_g2_modularity(ctx: ModularContext) -> List[CheckResult]:
    other = new_context(s_transform(ctx.tau))
    return [make_result(f"g2_modularity[{tau_label(ctx.tau)}]", other.constant("g2"),
                        ctx.tau ** 4 * ctx.constant("g2"), 1e-8)]


# ---------------------------------------------------------------------------
# Property suite
# ---------------------------------------------------------------------------

def random_expr(rng: np.random.Generator, points: Sequence[int] = (1, 2, 3), max_terms: int = 3,
                max_atoms: int = 2, allow_zhat: bool = True) -> Expr:
    """Random polynomial in atoms with modest pole orders"""
    E = Expr.zero()
    for _ in range(int(rng.integers(1, max_terms + 1))):
        term = Expr.scalar(complex(rng.normal(), rng.normal()))
        for _ in range(int(rng.integers(1, max_atoms + 1))):
            a, b = (int(p) for p in rng.choice(list(points), 2, replace=False))
            kind = int(rng.integers(0, 5 if allow_zhat else 4))
            if kind < 3:
                term = term * Expr.wp(kind % 2, a, b)
            elif kind == 3:
                term = term * Expr.const("eta1h")
            else:
                term = term * Expr.zhat(a, b)
        E = E + term
    return E


def _random_dependent(rng: np.random.Generator, active: int, **kwargs) -> Expr:
    while True:
        E = random_expr(rng, **kwargs)
        if E.depends_on(active):
            return E


def _worst(name: str, pairs: List[tuple], tol: float, detail: str) -> CheckResult:
    worst = max(pairs, key=lambda p: p[0]) if pairs else (0.0, 0j, 0j)
    return make_result(name, worst[1], worst[2], tol, detail, worst[0])


def _scaled_error(got: complex, want: complex) -> float:
    return float(abs(complex(got) - complex(want)) / max(abs(want), 1.0))


def check_anchor_independence(ctx: ModularContext, cases: int, rng: np.random.Generator) -> List[CheckResult]:
    pairs = []
    for _ in range(cases):
        F = _random_dependent(rng, 1)
        lowest, highest = choose_anchor(F, 1, "lowest"), choose_anchor(F, 1, "highest")
        if lowest == highest:
            highest = 3 if lowest == 2 else 2
        assign = random_points(ctx, rng, [2, 3], PROPERTY_SEPARATION)
        a = evaluate(integrate_once(F, 1, lowest), ctx, assign)
        b = evaluate(integrate_once(F, 1, highest), ctx, assign)
        pairs.append((_scaled_error(b, a), b, a))
    return [_worst("anchor_independence", pairs, 1e-8, f"{cases} random integrands")]


def check_order_independence(ctx: ModularContext, cases: int, rng: np.random.Generator) -> List[CheckResult]:
    pairs = []
    for _ in range(cases):
        F = random_expr(rng)
        points = sorted(F.points)
        order = [int(p) for p in rng.permutation(points)]
        a = integrate_all(F, points, ctx)
        b = integrate_all(F, order, ctx)
        pairs.append((_scaled_error(b, a), b, a))
    return [_worst("order_independence", pairs, 1e-9, f"{cases} random integrands")]


def check_linearity(ctx: ModularContext, cases: int, rng: np.random.Generator) -> List[CheckResult]:
    pairs = []
    for _ in range(cases):
        F, G = random_expr(rng), random_expr(rng)
        a, b = complex(rng.normal(), rng.normal()), complex(rng.normal(), rng.normal())
        assign = random_points(ctx, rng, [2, 3], PROPERTY_SEPARATION)
        lhs = evaluate(integrate_once(F * a + G * b, 1), ctx, assign)
        rhs = a * evaluate(integrate_once(F, 1), ctx, assign) + b * evaluate(integrate_once(G, 1), ctx, assign)
        pairs.append((_scaled_error(lhs, rhs), lhs, rhs))
    return [_worst("linearity", pairs, 1e-10, f"{cases} random pairs")]


def check_residue_sum(ctx: ModularContext, cases: int, rng: np.random.Generator) -> List[CheckResult]:
    pairs = []
    for _ in range(cases):
        F = _random_dependent(rng, 1, allow_zhat=False)
        assign = random_points(ctx, rng, [2, 3], PROPERTY_SEPARATION)
        residues = [evaluate(r, ctx, assign) for _, r in polar_decomposition(F, 1)]
        scale = max([abs(r) for r in residues] + [1.0])
        total = sum(residues)
        pairs.append((abs(total) / scale, total, 0j))
    return [_worst("residue_sum_zero", pairs, 1e-9, f"{cases} random meromorphic integrands")]


def check_round_trip(cases: int, rng: np.random.Generator) -> List[CheckResult]:
    failures = []
    for _ in range(cases):
        E = random_expr(rng, max_terms=4, max_atoms=3)
        text = render_expr(E)
        if parse(text) != E:
            failures.append(text)
    result = CheckResult(name="parser_round_trip", passed=not failures, got=complex(cases - len(failures)),
                         want=complex(cases), rel_err=len(failures) / max(cases, 1),
                         detail=failures[0] if failures else f"{cases} random expressions")
    log_check_result(result.name, result.passed, result.rel_err)
    return [result]


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

SUITES = ("paper", "kernel", "properties", "all")


def run_closed_form_suite(taus: Sequence[complex]) -> List[CheckResult]:
    results = []
    for tau in taus:
        ctx = new_context(tau)
        for check in (check_single_wp, check_zhat_vanishing, check_wp_powers,
                      check_two_point, check_chain, check_triangle, check_phi_plus):
            results.extend(check(ctx))
    unit = new_context(1j)
    results.extend(check_pv_agreement(unit))
    results.extend(check_pv_agreement(new_context(PV_SIGN_TAU), cases=PV_SIGN_CASES))
    results.extend(check_contour(unit))
    results.extend(check_modularity())
    return results


def run_kernel_suite(taus: Sequence[complex]) -> List[CheckResult]:
    results = []
    for tau in taus:
        ctx = new_context(tau)
        for check in (check_weierstrass_relation, check_zhat_symmetries, check_zhat_coefficient,
                      check_half_periods, check_lattice_constants, check_a_cycle, check_g2_modularity):
            results.extend(check(ctx))
    return results


def run_property_suite(tau: complex, cases: int = config.PROPERTY_CASES,
                       seed: int = config.CHECK_SEED) -> List[CheckResult]:
    ctx = new_context(tau)
    rng = np.random.default_rng(seed)
    results = []
    results.extend(check_anchor_independence(ctx, cases, rng))
    results.extend(check_order_independence(ctx, cases, rng))
    results.extend(check_linearity(ctx, cases, rng))
    results.extend(check_residue_sum(ctx, cases, rng))
    results.extend(check_round_trip(cases, rng))
    return results


def run_suite(suite: str = "paper", taus: Optional[Sequence[complex]] = None,
              cases: int = config.PROPERTY_CASES) -> List[CheckResult]:
    """
    Run a named suite

    Args:
        suite: paper, kernel, properties or all
        taus: Modular parameters (defaults to config.CHECK_TAUS)
        cases: Randomized cases per property

    Returns:
        List of CheckResult in a stable order
    """
    if suite not in SUITES:
        raise ValueError(f"Unknown suite '{suite}'; choose from {SUITES}")
    taus = [complex(t) for t in (taus or config.CHECK_TAUS)]
    start = time.time()

    results: List[CheckResult] = []
    if suite in ("paper", "all"):
        results.extend(run_closed_form_suite(taus))
    if suite in ("kernel", "all"):
        results.extend(run_kernel_suite(taus))
    if suite in ("properties", "all"):
        results.extend(run_property_suite(taus[0], cases))

    passed = sum(r.passed for r in results)
    log_info(f"Suite {suite}: {passed}/{len(results)} passed in {time.time() - start:.2f}s")
    return results
