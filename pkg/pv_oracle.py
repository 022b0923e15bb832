"""
Numerical oracles for a single regularized integration step

pv_single_step computes the principal value lim_{eps->0} of the integral over
the torus minus eps-disks around the poles, with measure dx dy / im(tau) so
the constant 1 integrates to 1. contour_contact_check evaluates the boundary
plus small-circle contour formula from exact function values only. Neither
path uses the Laurent engine.
"""

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

import config
from elliptic_kernel import ModularContext, zhat_value
from expr import ATOM_ZHAT, Expr, evaluate, poles_in
from logger import log_info, log_pv_result, log_warning
from regint_core import NotMeromorphic, validate_assignment

EXTRAPOLATIONS = ("linear", "eps_log_eps")


class PvOracleError(Exception):
    """Base exception for the numerical oracles"""
    pass


class NonConvergence(PvOracleError):
    """The quadrature did not produce a stable value"""
    pass


class PoleOnBoundary(PvOracleError):
    """No translate of the fundamental domain keeps the poles off its boundary"""
    pass


class PvOptionsError(PvOracleError):
    """Inconsistent quadrature options"""
    pass


@dataclass
class PvOptions:
    """Quadrature and extrapolation settings for pv_single_step"""
    eps_list: Tuple[float, ...] = config.PV_EPS_LIST
    patch_radius: float = config.PV_PATCH_RADIUS
    inner_fraction: float = config.PV_INNER_FRACTION
    radial_nodes: int = config.PV_RADIAL_NODES
    angular_nodes: int = config.PV_ANGULAR_NODES
    panel_nodes: int = config.PV_PANEL_NODES
    extrapolation: str = config.PV_EXTRAPOLATION
    tolerance: float = config.PV_TOLERANCE
    boundary_margin: float = config.PV_BOUNDARY_MARGIN

    @classmethod
    def from_config(cls, **overrides) -> "PvOptions":
        values = config.get_pv_defaults()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def validate(self):
        """
        Raises:
            PvOptionsError: If the excision radii or node counts are unusable
        """
        if not 0 < self.inner_fraction < 1:
            raise PvOptionsError("inner_fraction must lie in (0, 1)")
        eps = list(self.eps_list)
        if not eps:
            raise PvOptionsError("eps_list must not be empty")
        if any(e <= 0 for e in eps):
            raise PvOptionsError(f"Excision radii must be positive: {eps}")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise PvOptionsError(f"eps_list must be strictly decreasing: {eps}")
        if max(eps) >= self.patch_radius * self.inner_fraction:
            raise PvOptionsError(
                f"Largest eps {max(eps)} must stay inside the cutoff plateau "
                f"{self.patch_radius * self.inner_fraction:.4g}"
            )
        if min(self.radial_nodes, self.angular_nodes, self.panel_nodes) < 4:
            raise PvOptionsError("Node counts must be at least 4")
        if self.extrapolation not in EXTRAPOLATIONS:
            raise PvOptionsError(f"Unknown extrapolation '{self.extrapolation}'; use one of {EXTRAPOLATIONS}")

    def halved(self) -> "PvOptions":
        """Same options at half the quadrature resolution"""
        return PvOptions(
            eps_list=tuple(self.eps_list),
            patch_radius=self.patch_radius,
            inner_fraction=self.inner_fraction,
            radial_nodes=max(self.radial_nodes // 2, 4),
            angular_nodes=max(self.angular_nodes // 2, 4),
            panel_nodes=max(self.panel_nodes // 2, 4),
            extrapolation=self.extrapolation,
            tolerance=self.tolerance,
            boundary_margin=self.boundary_margin,
        )


@dataclass
class PvReport:
    """Principal value with its extrapolation data"""
    value: complex
    per_eps_values: List[complex]
    extrapolated_error: float
    converged: bool
    eps_list: List[float] = field(default_factory=list)
    domain_origin: complex = 0j
    patch_radius: float = 0.0
    elapsed: float = 0.0


@dataclass
class Verdict:
    """Engine vs oracle comparison"""
    passed: bool
    deviation: float
    engine: complex
    oracle: complex
    rel_tol: float
    reason: str = ""


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def _lattice_coords(ctx: ModularContext, z):
    y = np.imag(z) / ctx.im_tau
    x = np.real(z) - y * ctx.tau.real
    return x, y


def shortest_period(ctx: ModularContext) -> float:
    return min(abs(m + n * ctx.tau) for m in range(-2, 3) for n in range(-2, 3) if (m, n) != (0, 0))


def periodic_distance(ctx: ModularContext, z, p: complex) -> np.ndarray:
    """Flat distance from z to the nearest lattice translate of p"""
    x, y = _lattice_coords(ctx, np.asarray(z, dtype=complex) - p)
    w = (x - np.floor(x)) + (y - np.floor(y)) * ctx.tau
    best = np.full(np.shape(w), np.inf)
    for m in range(-1, 3):
        for n in range(-1, 3):
            best = np.minimum(best, np.abs(w - m - n * ctx.tau))
    return best


def choose_domain(ctx: ModularContext, poles: Sequence[complex], margin: float) -> complex:
    """
    Origin z0 of a translated fundamental domain z0 + [0,1) + [0,1) tau

    Among a 40 x 40 grid of origins, the one maximizing the flat distance
    between the poles and the domain edges.

    Raises:
        PoleOnBoundary: If the best origin still leaves a pole within margin
    """
    if not poles:
        return 0j
    grid = np.arange(40) / 40.0
    s0, t0 = np.meshgrid(grid, grid, indexing="ij")
    side = ctx.im_tau / abs(ctx.tau)
    clearance = np.full(s0.shape, np.inf)
    for p in poles:
        px, py = _lattice_coords(ctx, p)
        x = np.mod(px - s0, 1.0)
        y = np.mod(py - t0, 1.0)
        clearance = np.minimum(clearance, np.minimum(x, 1 - x) * side)
        clearance = np.minimum(clearance, np.minimum(y, 1 - y) * ctx.im_tau)
    best = np.unravel_index(np.argmax(clearance), clearance.shape)
    if clearance[best] < margin:
        raise PoleOnBoundary(
            f"Poles cannot be kept {margin} away from the domain boundary (best {clearance[best]:.3g})"
        )
    return complex(s0[best] + t0[best] * ctx.tau)


def place_in_domain(ctx: ModularContext, z: complex, z0: complex) -> complex:
    """Translate of z inside z0 + [0,1) + [0,1) tau"""
    x, y = _lattice_coords(ctx, complex(z) - z0)
    return complex(z0 + (x - math.floor(x)) + (y - math.floor(y)) * ctx.tau)


def _pole_positions(F: Expr, active: int, assign: Mapping[int, complex]) -> List[complex]:
    positions = []
    for q, _ in poles_in(F, active):
        if q not in assign:
            raise PvOracleError(f"Point z{q} must be assigned")
        positions.append(complex(assign[q]))
    return positions


def _prepare(F: Expr, active: int, assign: Mapping[int, complex], ctx: ModularContext) -> Dict[int, complex]:
    fixed = {p: complex(v) for p, v in assign.items() if p != active}
    missing = F.points - set(fixed) - {active}
    if missing:
        raise PvOracleError(f"Unassigned points: {sorted(missing)}")
    validate_assignment(ctx, fixed)
    return fixed


def _evaluate_at(F: Expr, ctx: ModularContext, fixed: Mapping[int, complex], active: int, z) -> np.ndarray:
    values = dict(fixed)
    values[active] = np.asarray(z, dtype=complex)
    return np.broadcast_to(np.asarray(evaluate(F, ctx, values), dtype=complex), np.shape(z))


# ---------------------------------------------------------------------------
# Principal value quadrature
# ---------------------------------------------------------------------------

def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 1 for x <= 0, 0 for x >= 1"""
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x < 1, np.exp(-1.0 / np.maximum(1 - x, 1e-300)), 0.0)
        b = np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
    return a / (a + b)


def _cutoff(r: np.ndarray, radius: float, inner_fraction: float) -> np.ndarray:
    return _smooth_step((r / radius - inner_fraction) / (1.0 - inner_fraction))


def _outer_integral(F: Expr, active: int, fixed: Mapping[int, complex], ctx: ModularContext,
                    poles: Sequence[complex], z0: complex, radius: float, opts: PvOptions) -> complex:
    """Periodic trapezoid over the torus of F (1 - sum of pole cutoffs)"""
    n = opts.panel_nodes
    grid = np.arange(n) / n
    s, t = np.meshgrid(grid, grid, indexing="ij")
    z = (z0 + s + t * ctx.tau).ravel()

    weight = np.ones(z.shape)
    for p in poles:
        weight -= _cutoff(periodic_distance(ctx, z, p), radius, opts.inner_fraction)
    live = weight > 0
    if not np.any(live):
        return 0j
    values = _evaluate_at(F, ctx, fixed, active, z[live])
    return complex(np.sum(values * weight[live]) / (n * n))


def _patch_integral(F: Expr, active: int, fixed: Mapping[int, complex], ctx: ModularContext,
                    p: complex, eps: float, radius: float, opts: PvOptions) -> complex:
    """Integral of F * cutoff over eps < |z - p| < radius in polar coordinates"""
    x, w = np.polynomial.legendre.leggauss(opts.radial_nodes)
    plateau = radius * opts.inner_fraction
    radii, radial_weights = [], []
    for lo, hi in ((eps, plateau), (plateau, radius)):
        radii.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        radial_weights.append(0.5 * (hi - lo) * w)
    r = np.concatenate(radii)
    wr = np.concatenate(radial_weights)

    m = opts.angular_nodes
    theta = 2 * np.pi * (np.arange(m) + 0.5) / m
    z = p + np.multiply.outer(r, np.exp(1j * theta))
    values = _evaluate_at(F, ctx, fixed, active, z.ravel()).reshape(z.shape)
    ring_means = values.mean(axis=1)
    chi = _cutoff(r, radius, opts.inner_fraction)
    return complex(np.sum(ring_means * chi * r * wr) * 2 * np.pi / ctx.im_tau)


def _extrapolation_terms(n_terms: int, model: str):
    """
    Basis functions of the excision-error model, constant first.

    linear: 1, eps, eps^2, ...; eps_log_eps: 1, eps log eps, eps^2, eps^3, ...
    """
    terms = [lambda e: np.ones_like(e)]
    power = 1
    if model == "eps_log_eps":
        terms.append(lambda e: e * np.log(e))
        power = 2
    while len(terms) < n_terms:
        terms.append(lambda e, k=power: e ** k)
        power += 1
    return terms[:n_terms]


def extrapolate(eps_vals: Sequence[float], f_vals: Sequence[complex], model: str = "linear") -> complex:
    """Value at eps = 0 of the model fitted through (eps, f) pairs"""
    eps = np.asarray(eps_vals, dtype=float)
    terms = _extrapolation_terms(len(eps), model)
    mat = np.array([t(eps) for t in terms]).T
    coeffs = np.linalg.solve(mat, np.asarray(f_vals, dtype=complex))
    return complex(coeffs[0])


def _pv_run(F: Expr, active: int, fixed: Mapping[int, complex], ctx: ModularContext,
            poles: Sequence[complex], z0: complex, radius: float, eps_list: Sequence[float],
            opts: PvOptions) -> List[complex]:
    outer = _outer_integral(F, active, fixed, ctx, poles, z0, radius, opts)
    values = []
    for eps in eps_list:
        inner = sum(_patch_integral(F, active, fixed, ctx, p, eps, radius, opts) for p in poles)
        values.append(outer + inner)
    return values


def pv_single_step(F: Expr, active: int, assign: Mapping[int, complex], ctx: ModularContext,
                   opts: Optional[PvOptions] = None) -> PvReport:
    """
    Principal value of F over the active variable at fixed other points

    Args:
        F: Integrand
        active: Active point
        assign: Values of every other point of F
        ctx: Modular context
        opts: Quadrature options (config defaults when None)

    Returns:
        PvReport; converged is False when the error estimate exceeds tolerance

    Raises:
        NonConvergence: If the quadrature produces non-finite values
        PoleOnBoundary: If the domain cannot be translated away from the poles
        PvOptionsError: If the options are inconsistent
    """
    opts = opts or PvOptions.from_config()
    opts.validate()
    start = time.time()

    fixed = _prepare(F, active, assign, ctx)
    poles = _pole_positions(F, active, fixed)
    z0 = choose_domain(ctx, poles, opts.boundary_margin)
    poles = [place_in_domain(ctx, p, z0) for p in poles]

    # Patches must be disjoint and smaller than the torus
    radius = min(opts.patch_radius, 0.45 * shortest_period(ctx))
    for i, p in enumerate(poles):
        for other in poles[i + 1:]:
            radius = min(radius, 0.5 * float(periodic_distance(ctx, p, other)))

    # A clipped patch shrinks the excision radii in proportion
    eps_list = [e * min(1.0, radius / opts.patch_radius) for e in opts.eps_list]
    if radius < opts.patch_radius:
        log_info(f"Patch radius clipped to {radius:.4g}; eps_list rescaled to {eps_list}")

    # One extra, smaller radius for the extrapolation error estimate
    extended = eps_list + [eps_list[-1] / 2.0]
    values = _pv_run(F, active, fixed, ctx, poles, z0, radius, extended, opts)
    coarse = _pv_run(F, active, fixed, ctx, poles, z0, radius, eps_list, opts.halved())

    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(coarse)):
        raise NonConvergence("Quadrature produced non-finite values")

    n = len(eps_list)
    value = extrapolate(eps_list, values[:n], opts.extrapolation)
    if n > 1:
        shifted = extrapolate(extended[1:], values[1:], opts.extrapolation)
    else:
        shifted = values[-1]
    error = max(abs(value - shifted), abs(value - extrapolate(eps_list, coarse, opts.extrapolation)))
    converged = error <= opts.tolerance * max(1.0, abs(value))

    elapsed = time.time() - start
    log_pv_result(value, error, converged, elapsed)
    if not converged:
        log_warning(f"PV oracle error estimate {error:.3g} exceeds tolerance {opts.tolerance}")

    return PvReport(
        value=value,
        per_eps_values=values[:n],
        extrapolated_error=float(error),
        converged=bool(converged),
        eps_list=eps_list,
        domain_origin=z0,
        patch_radius=radius,
        elapsed=elapsed,
    )


# ---------------------------------------------------------------------------
# Contour formula
# ---------------------------------------------------------------------------

def _u(ctx: ModularContext, z):
    """u(z) = (conj(z) - z) / (conj(tau) - tau) = im z / im tau"""
    return np.imag(z) / ctx.im_tau


def _u_polynomial(F: Expr, active: int, fixed: Mapping[int, complex], ctx: ModularContext,
                  z: np.ndarray) -> List[np.ndarray]:
    """
    Coefficients h_k(z) with F = sum_k h_k(z) u^k, each h_k meromorphic.

    Zhat(z - q) = L_q(z) + 2 pi i (u(z) - u(q)) with L_q = theta'/theta(z - q).
    """
    two_pi_i = 2j * np.pi
    u_z = _u(ctx, z)
    values = dict(fixed)
    values[active] = z
    total: List[np.ndarray] = [np.zeros(z.shape, dtype=complex)]
    for mono, c in F.items():
        poly = [np.full(z.shape, c, dtype=complex)]
        for atom in mono:
            if atom.kind == ATOM_ZHAT and atom.involves(active):
                s = 1 if atom.a == active else -1
                q = fixed[atom.other(active)]
                meromorphic = zhat_value(ctx, z - q) - two_pi_i * (u_z - _u(ctx, q))
                factor = [s * (meromorphic - two_pi_i * _u(ctx, q)), np.full(z.shape, s * two_pi_i)]
            else:
                value = evaluate(Expr.from_atom(atom), ctx, values)
                factor = [np.broadcast_to(np.asarray(value, dtype=complex), z.shape)]
            product = [np.zeros(z.shape, dtype=complex) for _ in range(len(poly) + len(factor) - 1)]
            for i, a in enumerate(poly):
                for j, b in enumerate(factor):
                    product[i + j] = product[i + j] + a * b
            poly = product
        while len(total) < len(poly):
            total.append(np.zeros(z.shape, dtype=complex))
        for k, h in enumerate(poly):
            total[k] = total[k] + h
    return total


def _primitive_values(coeffs: List[np.ndarray], u) -> np.ndarray:
    """sum_k h_k u^{k+1} / (k+1)"""
    result = np.zeros(coeffs[0].shape, dtype=complex)
    for k, h in enumerate(coeffs):
        result = result + h * u ** (k + 1) / (k + 1)
    return result


def _edge_integral(func, a: complex, b: complex, panels: int, nodes: int) -> complex:
    """Composite Gauss-Legendre of func(z) dz along the segment a -> b"""
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = 0j
    for k in range(panels):
        lo = a + (b - a) * k / panels
        hi = a + (b - a) * (k + 1) / panels
        z = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        total += np.sum(func(z) * w) * 0.5 * (hi - lo)
    return complex(total)


def _circle_integral(func, p: complex, radius: float, nodes: int) -> complex:
    """Counterclockwise trapezoid of func(z) dz around |z - p| = radius"""
    theta = 2 * np.pi * np.arange(nodes) / nodes
    z = p + radius * np.exp(1j * theta)
    dz = 1j * (z - p) * (2 * np.pi / nodes)
    return complex(np.sum(func(z) * dz))


def _boundary_edges(ctx: ModularContext, z0: complex):
    corners = [z0, z0 + 1, z0 + 1 + ctx.tau, z0 + ctx.tau]
    return list(zip(corners, corners[1:] + corners[:1]))


def contour_contact_check(F: Expr, active: int, assign: Mapping[int, complex], ctx: ModularContext,
                          radius: float = config.CONTOUR_RADIUS, nodes: int = config.CONTOUR_NODES) -> complex:
    """
    Regularized integral by the contour formula

    With F = sum h_k u^k and G = sum h_k u^{k+1}/(k+1), the result is
    -int_{boundary} G dz + sum over poles of the small-circle integrals of G,
    where on each circle u(z) is replaced by its holomorphic part
    u(p) - (z - p)/(conj(tau) - tau).

    Raises:
        NonConvergence: If the circle integrals depend on the radius
    """
    fixed = _prepare(F, active, assign, ctx)
    poles = _pole_positions(F, active, fixed)
    z0 = choose_domain(ctx, poles, config.PV_BOUNDARY_MARGIN)
    poles = [place_in_domain(ctx, p, z0) for p in poles]
    tau_bar_minus_tau = np.conj(ctx.tau) - ctx.tau

    def on_edge(z):
        return _primitive_values(_u_polynomial(F, active, fixed, ctx, z), _u(ctx, z))

    boundary = sum(_edge_integral(on_edge, a, b, config.EDGE_PANELS, config.EDGE_NODES)
                   for a, b in _boundary_edges(ctx, z0))

    residues = 0j
    for p in poles:
        def on_circle(z, p=p):
            u_hol = _u(ctx, p) - (z - p) / tau_bar_minus_tau
            return _primitive_values(_u_polynomial(F, active, fixed, ctx, z), u_hol)

        full = _circle_integral(on_circle, p, radius, nodes)
        half = _circle_integral(on_circle, p, radius / 2, nodes)
        if not np.isfinite(full) or abs(full - half) > 1e-6 * max(1.0, abs(full)):
            raise NonConvergence(f"Circle integral around {p:.6g} is radius dependent ({full} vs {half})")
        residues += full

    value = complex(residues - boundary)
    log_info(f"Contour formula: value={value:.12g}, poles={len(poles)}")
    return value


def a_cycle_integral(F: Expr, active: int, assign: Mapping[int, complex], ctx: ModularContext,
                     z0: Optional[complex] = None) -> complex:
    """int_{z0}^{z0+1} F dz along the A-cycle of the translated domain"""
    fixed = _prepare(F, active, assign, ctx)
    if z0 is None:
        z0 = choose_domain(ctx, _pole_positions(F, active, fixed), config.PV_BOUNDARY_MARGIN)

    def along(z):
        return _evaluate_at(F, ctx, fixed, active, z)

    return _edge_integral(along, z0, z0 + 1, config.EDGE_PANELS, config.EDGE_NODES)


def a_cycle_relation(F: Expr, active: int, assign: Mapping[int, complex], ctx: ModularContext,
                     radius: float = config.CONTOUR_RADIUS, nodes: int = config.CONTOUR_NODES) -> complex:
    """
    Regularized integral of a meromorphic F as
    sum_p 2 pi i res_p(u F) + int_A F dz

    Raises:
        NotMeromorphic: If a Zhat atom involves the active variable
    """
    for mono, _ in F.items():
        for atom in mono:
            if atom.kind == ATOM_ZHAT and atom.involves(active):
                raise NotMeromorphic(f"{atom.label()} is not meromorphic in z{active}")

    fixed = _prepare(F, active, assign, ctx)
    poles = _pole_positions(F, active, fixed)
    z0 = choose_domain(ctx, poles, config.PV_BOUNDARY_MARGIN)
    poles = [place_in_domain(ctx, p, z0) for p in poles]
    tau_bar_minus_tau = np.conj(ctx.tau) - ctx.tau

    residues = 0j
    for p in poles:
        def u_times_f(z, p=p):
            u_hol = _u(ctx, p) - (z - p) / tau_bar_minus_tau
            return u_hol * _evaluate_at(F, ctx, fixed, active, z)
        residues += _circle_integral(u_times_f, p, radius, nodes)

    return complex(residues + a_cycle_integral(F, active, assign, ctx, z0))


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

def compare(engine: complex, oracle: Union[PvReport, complex], rel_tol: float = config.PV_TOLERANCE) -> Verdict:
    """
    Relative deviation |engine - oracle| / max(|oracle|, 1) against rel_tol

    An unconverged report never passes.
    """
    if isinstance(oracle, PvReport):
        value, converged = oracle.value, oracle.converged
    else:
        value, converged = complex(oracle), True
    deviation = abs(complex(engine) - value) / max(abs(value), 1.0)
    passed = converged and deviation < rel_tol
    reason = ""
    if not converged:
        reason = "oracle did not converge"
    elif not passed:
        reason = f"deviation {deviation:.3g} exceeds {rel_tol:.3g}"
    return Verdict(passed=passed, deviation=float(deviation), engine=complex(engine),
                   oracle=value, rel_tol=rel_tol, reason=reason)


def report_to_dict(report: PvReport) -> dict:
    data = asdict(report)
    data["value"] = [report.value.real, report.value.imag]
    data["per_eps_values"] = [[v.real, v.imag] for v in report.per_eps_values]
    data["domain_origin"] = [report.domain_origin.real, report.domain_origin.imag]
    return data
