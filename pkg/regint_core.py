"""
Regularized integration on the torus by formal primitives and residues

One step in the active variable z: write the integrand as a polynomial in the
anchored variable W = Zhat(z - z_anchor), take the W-antiderivative G and sum
the holomorphic residues of G over every pole. Iterating over all points
yields a number; by construction the result does not depend on the anchor or
on the order of the points.
"""

import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

import config
from elliptic_kernel import ModularContext, reduce_to_fundamental
from expr import (
    ATOM_ZHAT,
    EXPR_RING,
    Atom,
    Expr,
    PoleHit,
    evaluate,
    expand_atom,
    laurent_expand,
    make_wp,
    poles_in,
)
from laurent import LaurentSeries, product
from logger import log_info, log_integration_step, log_residue

AnchorPolicy = Union[str, int]


class RegintError(Exception):
    """Base exception for regularized integration errors"""
    pass


class NoPoles(RegintError):
    """The integrand does not depend on the active variable"""
    pass


class NotMeromorphic(RegintError):
    """A Zhat atom in the active variable where a meromorphic integrand is required"""
    pass


class NonConstantResult(RegintError):
    """Atoms survived integration over every listed point"""
    pass


@dataclass(frozen=True)
class WPolynomial:
    """
    sum_k coeffs[k] * W^k with W = Zhat(z_active - z_anchor).

    Inside a coefficient, an atom Zhat(z_active - z_r) with r != anchor stands
    for the elliptic difference Zhat(z_active - z_r) - W (with the atom's
    orientation sign applied to W). The pair is only expanded at residue time.
    """
    active: int
    anchor: int
    coeffs: Tuple[Expr, ...]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def w_expr(self) -> Expr:
        return Expr.zhat(self.active, self.anchor)

    def is_difference(self, atom: Atom) -> bool:
        return (atom.kind == ATOM_ZHAT and atom.involves(self.active)
                and atom.other(self.active) != self.anchor)

    def orientation(self, atom: Atom) -> int:
        return 1 if atom.a == self.active else -1

    def _substitute(self, coeff: Expr) -> Expr:
        """Replace difference tokens by atom - s W"""
        w = self.w_expr
        result = Expr.zero()
        for mono, c in coeff.items():
            term = Expr.scalar(c)
            for atom in mono:
                factor = Expr.from_atom(atom)
                if self.is_difference(atom):
                    factor = factor - w * self.orientation(atom)
                term = term * factor
            result = result + term
        return result

    def to_expr(self) -> Expr:
        """Reassemble sum_k coeffs[k] W^k as an ordinary Expr"""
        w = self.w_expr
        result = Expr.zero()
        for k, coeff in enumerate(self.coeffs):
            if not coeff.is_zero:
                result = result + self._substitute(coeff) * (w ** k)
        return result


@dataclass
class StepRecord:
    """One integration step, kept for --trace"""
    var: int
    anchor: Optional[int]
    result: Expr
    residues: List[Tuple[int, Expr]] = field(default_factory=list)


def _poly_mul(left: List[Expr], right: List[Expr]) -> List[Expr]:
    out = [Expr.zero() for _ in range(len(left) + len(right) - 1)]
    for i, a in enumerate(left):
        if a.is_zero:
            continue
        for j, b in enumerate(right):
            if not b.is_zero:
                out[i + j] = out[i + j] + a * b
    return out


def rewrite_in_W(F: Expr, active: int, anchor: int) -> WPolynomial:
    """
    Express F as a polynomial in W = Zhat(z_active - z_anchor)

    Args:
        F: Integrand
        active: Active point
        anchor: Anchor point (!= active)

    Returns:
        WPolynomial whose reassembly equals F

    Raises:
        NoPoles: If F does not depend on the active variable
    """
    if anchor == active:
        raise RegintError(f"Anchor z{anchor} coincides with the active variable")
    if not F.depends_on(active):
        raise NoPoles(f"Integrand does not depend on z{active}")

    P = WPolynomial(active, anchor, ())
    coeffs: List[Expr] = [Expr.zero()]
    for mono, c in F.items():
        poly = [Expr.scalar(c)]
        for atom in mono:
            if atom.kind == ATOM_ZHAT and atom.involves(active):
                s = P.orientation(atom)
                if atom.other(active) == anchor:
                    factor = [Expr.zero(), Expr.scalar(s)]
                else:
                    factor = [Expr.from_atom(atom), Expr.scalar(s)]
            else:
                factor = [Expr.from_atom(atom)]
            poly = _poly_mul(poly, factor)
        while len(coeffs) < len(poly):
            coeffs.append(Expr.zero())
        for k, piece in enumerate(poly):
            coeffs[k] = coeffs[k] + piece

    while len(coeffs) > 1 and coeffs[-1].is_zero:
        coeffs.pop()
    return WPolynomial(active, anchor, tuple(coeffs))


def primitive_in_W(P: WPolynomial) -> WPolynomial:
    """G = sum_k coeffs[k] W^{k+1}/(k+1), so dG/dW reproduces P"""
    coeffs = [Expr.zero()] + [c * (1.0 / (k + 1)) for k, c in enumerate(P.coeffs)]
    return WPolynomial(P.active, P.anchor, tuple(coeffs))


def candidate_poles(G: WPolynomial) -> List[int]:
    """Points where G may have a pole in the active variable, anchor included"""
    found = {G.anchor}
    for coeff in G.coeffs:
        for q, _ in poles_in(coeff, G.active):
            found.add(q)
    return sorted(found)


def _factor_pole(G: WPolynomial, atom: Atom, q: int) -> int:
    if not atom.involves(G.active):
        return 0
    if G.is_difference(atom):
        return 1 if q in (atom.other(G.active), G.anchor) else 0
    return atom.pole_order() if atom.other(G.active) == q else 0


def residue_at(G: WPolynomial, q: int, jet_cap: Optional[int] = None) -> Expr:
    """
    Holomorphic residue of G at z_active = z_q

    Every factor is expanded at z_active = z_q + w just far enough for the
    w^{-1} coefficient of the product; antiholomorphic w-bar terms are dropped.

    Args:
        G: W-polynomial (normally a primitive)
        q: Candidate pole
        jet_cap: Maximum derivative order

    Returns:
        Expr in the remaining points

    Raises:
        JetCapExceeded: If an expansion needs more derivatives than the cap
    """
    jet_cap = jet_cap or config.get_jet_cap()
    active = G.active
    w_sign, w_atom = G.w_expr.terms[0].coeff, G.w_expr.terms[0].atoms[0]
    w_pole = 1 if q == G.anchor else 0
    w_cache: Dict[int, LaurentSeries] = {}

    def w_series(trunc: int) -> LaurentSeries:
        if trunc not in w_cache:
            series = expand_atom(w_atom, active, q, trunc, jet_cap)
            w_cache[trunc] = series if w_sign == 1 else -series
        return w_cache[trunc]

    def factor_series(atom: Atom, trunc: int) -> LaurentSeries:
        series = expand_atom(atom, active, q, trunc, jet_cap)
        if G.is_difference(atom):
            w = w_series(trunc)
            series = series - w if G.orientation(atom) == 1 else series + w
        return series

    total = Expr.zero()
    n_terms = 0
    for k, coeff in enumerate(G.coeffs):
        if coeff.is_zero:
            continue
        for mono, c in coeff.items():
            poles = [_factor_pole(G, atom, q) for atom in mono]
            total_pole = sum(poles) + k * w_pole
            if total_pole == 0:
                continue
            factors = [factor_series(atom, total_pole - 1 - p) for atom, p in zip(mono, poles)]
            factors += [w_series(total_pole - 1 - w_pole)] * k
            series = product(EXPR_RING, factors, -1)
            total = total + series.coefficient(-1) * c
            n_terms += 1

    log_residue(active, q, n_terms)
    return total


def choose_anchor(F: Expr, active: int, policy: AnchorPolicy = "lowest") -> int:
    """
    Anchor for the W-rewrite

    An explicit point index is a preference: it is used when it is not the
    active point and appears in F, otherwise the "lowest" rule applies. This
    lets one index serve every step of a full integration.

    Args:
        F: Integrand depending on the active variable
        active: Active point
        policy: "lowest" or "highest" pole point, or a preferred point index

    Returns:
        Anchor point index
    """
    if isinstance(policy, (int, np.integer)) and not isinstance(policy, bool):
        if policy != active and int(policy) in F.points:
            return int(policy)
        log_info(f"Anchor z{policy} unusable for z{active}; falling back to lowest")
        policy = "lowest"
    pole_points = [q for q, _ in poles_in(F, active)]
    if not pole_points:
        raise NoPoles(f"Integrand has no poles in z{active}")
    if policy == "lowest":
        return pole_points[0]
    if policy == "highest":
        return pole_points[-1]
    raise RegintError(f"Unknown anchor policy: {policy!r}")


def integration_step(F: Expr, active: int, anchor_policy: AnchorPolicy = "lowest",
                     jet_cap: Optional[int] = None) -> StepRecord:
    """
    Integrate F over z_active and keep the per-pole residues

    Terms free of z_active pass through unchanged (the volume is 1).
    """
    dependent, free = F.split(active)
    if dependent.is_zero:
        log_integration_step(active, len(F), len(F), active)
        return StepRecord(var=active, anchor=None, result=F)

    anchor = choose_anchor(dependent, active, anchor_policy)
    G = primitive_in_W(rewrite_in_W(dependent, active, anchor))
    residues = []
    result = free
    for q in candidate_poles(G):
        r = residue_at(G, q, jet_cap)
        residues.append((q, r))
        result = result + r

    log_integration_step(active, len(F), len(result), anchor)
    return StepRecord(var=active, anchor=anchor, result=result, residues=residues)


def integrate_once(F: Expr, active: int, anchor_policy: AnchorPolicy = "lowest",
                   jet_cap: Optional[int] = None) -> Expr:
    """
    Regularized integral of F over z_active

    Args:
        F: Integrand, polynomial in atoms
        active: Point to integrate out
        anchor_policy: Anchor choice (see choose_anchor)
        jet_cap: Maximum derivative order

    Returns:
        Expr in the remaining points
    """
    return integration_step(F, active, anchor_policy, jet_cap).result


def integrate_all(F: Expr, order: Sequence[int], ctx: ModularContext,
                  anchor_policy: AnchorPolicy = "lowest",
                  trace: Optional[List[StepRecord]] = None) -> complex:
    """
    Iterated regularized integral over every point in `order`

    Args:
        F: Integrand
        order: Integration order (first entry is integrated first)
        ctx: Context resolving the constant symbols of the final Expr
        anchor_policy: Anchor choice for every step
        trace: Optional list that receives one StepRecord per step

    Returns:
        Complex value

    Raises:
        NonConstantResult: If atoms remain after the last step
    """
    if len(set(order)) != len(order):
        raise RegintError(f"Integration order repeats a point: {list(order)}")

    current = F
    for p in order:
        step = integration_step(current, p, anchor_policy, ctx.jet_cap)
        if trace is not None:
            trace.append(step)
        current = step.result

    if not current.is_constant:
        raise NonConstantResult(
            f"Points {sorted(current.points)} remain after integrating over {list(order)}"
        )
    return complex(evaluate(current, ctx, {}))


def polar_decomposition(F: Expr, active: int, jet_cap: Optional[int] = None) -> List[Tuple[int, Expr]]:
    """
    Simple-pole residues r_q of a meromorphic F in z_active

    F minus sum_q r_q Zhat(z_active - z_q) has no simple poles; for elliptic F
    the r_q sum to zero.

    Raises:
        NotMeromorphic: If a Zhat atom involves the active variable
    """
    for mono, _ in F.items():
        for atom in mono:
            if atom.kind == ATOM_ZHAT and atom.involves(active):
                raise NotMeromorphic(f"{atom.label()} is not meromorphic in z{active}")

    return [(q, laurent_expand(F, active, q, -1, jet_cap).coefficient(-1))
            for q, _ in poles_in(F, active)]


def polar_part(F: Expr, active: int, jet_cap: Optional[int] = None) -> Expr:
    """Phi_+ = sum_q r_q Zhat(z_active - z_q)"""
    result = Expr.zero()
    for q, r in polar_decomposition(F, active, jet_cap):
        result = result + r * Expr.zhat(active, q)
    return result


def validate_assignment(ctx: ModularContext, assign: Mapping[int, complex]):
    """
    Reject assignments with two points equal modulo the lattice

    Raises:
        PoleHit: For the first coincident pair
    """
    points = sorted(assign)
    for i, a in enumerate(points):
        for b in points[i + 1:]:
            u = reduce_to_fundamental(ctx, complex(assign[a]) - complex(assign[b]))
            gaps = [abs(u), abs(u - 1), abs(u - ctx.tau), abs(u - 1 - ctx.tau)]
            if min(gaps) < config.POLE_TOLERANCE:
                raise PoleHit(make_wp(0, a, b)[1], f"Points z{a} and z{b} coincide modulo the lattice")


class RegularizedIntegrator:
    """
    Regularized integration at a fixed modular context

    Wraps the step functions with the context's jet cap, an anchor policy and
    timing for reports.
    """

    def __init__(self, ctx: ModularContext, anchor_policy: AnchorPolicy = "lowest"):
        self.ctx = ctx
        self.anchor_policy = anchor_policy

    def integrate_once(self, F: Expr, active: int) -> Expr:
        return integrate_once(F, active, self.anchor_policy, self.ctx.jet_cap)

    def integrate_all(self, F: Expr, order: Optional[Sequence[int]] = None) -> Tuple[complex, List[StepRecord]]:
        """
        Integrate over all points of F

        Args:
            F: Integrand
            order: Integration order; ascending point indices by default

        Returns:
            Tuple of (value, step records)
        """
        order = list(order) if order is not None else sorted(F.points)
        if order and sorted(order) != sorted(set(order) | F.points):
            raise RegintError(
                f"Order {order} is not a permutation of the integrand's points {sorted(F.points)}"
            )
        trace: List[StepRecord] = []
        start = time.time()
        value = integrate_all(F, order, self.ctx, self.anchor_policy, trace)
        log_info(f"Integrated over {order}: value={value:.12g} in {time.time() - start:.3f}s")
        return value, trace

    def evaluate(self, E: Expr, assign: Mapping[int, complex]):
        validate_assignment(self.ctx, assign)
        return evaluate(E, self.ctx, assign)
