"""
Numerical kernel for elliptic functions on E = C/(Z + Z tau)

Evaluates the odd Jacobi theta function, the Weierstrass functions and their
derivatives, the completed log-derivative Z-hat and the Eisenstein constants
from q-series. Every evaluator accepts a scalar or a numpy array of points.
"""

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

import config
from logger import log_context_created

ArrayLike = Union[complex, np.ndarray]


class EllipticKernelError(Exception):
    """Base exception for kernel evaluation errors"""
    pass


class NonPositiveImaginaryPart(EllipticKernelError):
    """tau is not in the upper half plane"""
    pass


class CutoffTooSmall(EllipticKernelError):
    """The q-series cutoff does not reach the requested accuracy"""
    pass


class JetCapExceeded(EllipticKernelError):
    """A jet or expansion beyond the configured derivative cap was requested"""
    pass


class PoleAtLatticePoint(EllipticKernelError):
    """A function with a lattice pole was evaluated at a lattice point"""

    def __init__(self, message: str, point: Optional[complex] = None):
        super().__init__(message)
        self.point = point


# Riemann zeta at even integers, zeta(2k) = |B_2k| (2 pi)^2k / (2 (2k)!)
ZETA_EVEN = {
    1: math.pi ** 2 / 6,
    2: math.pi ** 4 / 90,
    3: math.pi ** 6 / 945,
}


@dataclass(frozen=True)
class ModularContext:
    """
    A fixed modular parameter with its cached constants.

    Immutable; share freely between threads. `eisenstein[k]` holds G_{2k}
    (half lattice sum) for 2 <= k <= len(eisenstein) - 1.
    """
    tau: complex
    q: complex
    series_cutoff: int
    jet_cap: int
    constants: Mapping[str, complex]
    eisenstein: Tuple[complex, ...] = field(repr=False, default=())

    @property
    def im_tau(self) -> float:
        return self.tau.imag

    def constant(self, name: str) -> complex:
        """
        Resolve a named constant

        Args:
            name: One of the DSL tokens (g2, g3, eta1h, G4, G6, pi) or G<2k>

        Returns:
            The constant's value at this tau
        """
        if name == "pi":
            return complex(math.pi)
        if name in self.constants:
            return self.constants[name]
        if name.startswith("G") and name[1:].isdigit():
            weight = int(name[1:])
            if weight % 2 == 0 and weight >= 4:
                return self.G(weight // 2)
        raise KeyError(f"Unknown constant: {name}")

    def G(self, k: int) -> complex:
        """Eisenstein series G_{2k}, extended by the Weierstrass recurrence"""
        if k < 2:
            raise ValueError("G_{2k} is only cached for k >= 2")
        if k < len(self.eisenstein):
            return self.eisenstein[k]
        return _eisenstein_tower(self.eisenstein[2], self.eisenstein[3], k)[k]


def _divisor_series(q: complex, power: int, cutoff: int) -> complex:
    """Lambert series sum_n n^power q^n / (1 - q^n) = sum_m sigma_power(m) q^m"""
    n = np.arange(1, cutoff + 1, dtype=float)
    qn = q ** n
    return complex(np.sum(n ** power * qn / (1.0 - qn)))


def _eisenstein_tower(G4: complex, G6: complex, k_max: int) -> List[complex]:
    """
    G_{2k} for k <= k_max from G4 and G6.

    Uses the Laurent coefficients c_k = 2(2k-1) G_{2k} of the Weierstrass
    function, which satisfy (2k+1)(k-3) c_k = 3 sum_{m=2}^{k-2} c_m c_{k-m}.
    """
    c = [0j] * (k_max + 1)
    if k_max >= 2:
        c[2] = 6.0 * G4
    if k_max >= 3:
        c[3] = 10.0 * G6
    for k in range(4, k_max + 1):
        c[k] = 3.0 * sum(c[m] * c[k - m] for m in range(2, k - 1)) / ((2 * k + 1) * (k - 3))
    return [0j, 0j] + [c[k] / (2 * (2 * k - 1)) for k in range(2, k_max + 1)]


def new_context(tau: complex, series_cutoff: Optional[int] = None,
                jet_cap: Optional[int] = None) -> ModularContext:
    """
    Build a ModularContext with all q-series constants populated

    Args:
        tau: Modular parameter, im(tau) > 0
        series_cutoff: Number of q-series terms (defaults to config)
        jet_cap: Maximum derivative order for jets (defaults to config)

    Returns:
        ModularContext

    Raises:
        NonPositiveImaginaryPart: If im(tau) <= 0
        CutoffTooSmall: If the cutoff is below 1 or |q|^cutoff > 1e-14
        JetCapExceeded: If jet_cap is below 1
    """
    tau = complex(tau)
    series_cutoff = config.get_series_cutoff() if series_cutoff is None else int(series_cutoff)
    jet_cap = config.get_jet_cap() if jet_cap is None else int(jet_cap)
    if series_cutoff < 1:
        raise CutoffTooSmall(f"series_cutoff must be at least 1, got {series_cutoff}")
    if jet_cap < 1:
        raise JetCapExceeded(f"jet_cap must be at least 1, got {jet_cap}")

    if tau.imag <= 0:
        raise NonPositiveImaginaryPart(f"im(tau) must be positive, got tau={tau}")

    q = complex(np.exp(2j * np.pi * tau))
    if abs(q) ** series_cutoff > config.CUTOFF_TOLERANCE:
        raise CutoffTooSmall(
            f"|q|^{series_cutoff} = {abs(q) ** series_cutoff:.3g} exceeds {config.CUTOFF_TOLERANCE}; "
            f"raise ELLREG_SERIES_CUTOFF or use a tau with larger imaginary part"
        )

    E2 = 1.0 - 24.0 * _divisor_series(q, 1, series_cutoff)
    E4 = 1.0 + 240.0 * _divisor_series(q, 3, series_cutoff)
    E6 = 1.0 - 504.0 * _divisor_series(q, 5, series_cutoff)

    G4 = ZETA_EVEN[2] * E4
    G6 = ZETA_EVEN[3] * E6
    eta1 = (math.pi ** 2 / 3.0) * E2
    pi_over_imtau = math.pi / tau.imag

    constants = {
        "E2": E2,
        "E4": E4,
        "E6": E6,
        "G4": G4,
        "G6": G6,
        "g2": 60.0 * 2.0 * G4,
        "g3": 140.0 * 2.0 * G6,
        "eta1": eta1,
        "eta1hat": eta1 - pi_over_imtau,
        "eta1h": eta1 - pi_over_imtau,
        "pi_over_imtau": complex(pi_over_imtau),
    }

    tower = _eisenstein_tower(G4, G6, jet_cap + 4)

    log_context_created(tau, series_cutoff, jet_cap)
    return ModularContext(
        tau=tau,
        q=q,
        series_cutoff=series_cutoff,
        jet_cap=jet_cap,
        constants=MappingProxyType(constants),
        eisenstein=tuple(tower),
    )


@dataclass(frozen=True)
class Jet:
    """Local expansion sum_k coeffs[k - lead_exponent] w^k around `center`"""
    center: complex
    order: int
    coeffs: Tuple[complex, ...]
    lead_exponent: int = 0

    def __post_init__(self):
        if len(self.coeffs) != self.order - self.lead_exponent + 1:
            raise ValueError("Jet length does not match order and lead exponent")

    def coefficient(self, k: int) -> complex:
        if k < self.lead_exponent:
            return 0j
        if k > self.order:
            raise JetCapExceeded(f"Coefficient w^{k} beyond jet order {self.order}")
        return self.coeffs[k - self.lead_exponent]


def _scalar_or_array(value: np.ndarray, was_scalar: bool) -> ArrayLike:
    if was_scalar:
        return complex(value)
    return value


def _lattice_coordinates(ctx: ModularContext, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Coordinates (x, y) with z = x + y tau"""
    y = z.imag / ctx.tau.imag
    x = z.real - y * ctx.tau.real
    return x, y


def reduce_to_fundamental(ctx: ModularContext, z: ArrayLike) -> ArrayLike:
    """
    Representative of z in {x + y tau : x, y in [0, 1)}

    Args:
        ctx: Modular context
        z: Point(s) in C

    Returns:
        Reduced point(s)
    """
    was_scalar = np.isscalar(z)
    z = np.asarray(z, dtype=complex)
    x, y = _lattice_coordinates(ctx, z)
    m = np.floor(x + 1e-13)
    n = np.floor(y + 1e-13)
    reduced = z - m - n * ctx.tau
    return _scalar_or_array(reduced, was_scalar)


def _center(ctx: ModularContext, z: np.ndarray) -> np.ndarray:
    """Representative with lattice coordinates in [-1/2, 1/2)"""
    x, y = _lattice_coordinates(ctx, z)
    return z - np.floor(x + 0.5) - np.floor(y + 0.5) * ctx.tau


def _check_poles(ctx: ModularContext, u: np.ndarray):
    near = np.abs(u) < config.POLE_TOLERANCE
    if np.any(near):
        bad = complex(np.asarray(u)[near].flat[0])
        raise PoleAtLatticePoint(f"Evaluation within {config.POLE_TOLERANCE} of a lattice point", bad)


def _theta_derivatives(ctx: ModularContext, z: np.ndarray, k_max: int) -> List[np.ndarray]:
    """
    theta^{(k)}(z) for k = 0..k_max by term-wise differentiated q-series.

    theta(z) = 2 sum_{n>=0} (-1)^n exp(pi i tau (n+1/2)^2) sin((2n+1) pi z)
    """
    n = np.arange(ctx.series_cutoff + 1)
    freq = (2 * n + 1) * np.pi
    amp = 2.0 * (-1.0) ** n * np.exp(1j * np.pi * ctx.tau * (n + 0.5) ** 2)

    phase = np.multiply.outer(z, freq)
    derivs = []
    for k in range(k_max + 1):
        terms = amp * freq ** k * np.sin(phase + k * np.pi / 2)
        derivs.append(np.sum(terms, axis=-1))
    return derivs


def theta_jet(ctx: ModularContext, z: complex, order: int) -> Jet:
    """
    Taylor jet of the odd Jacobi theta function at z

    Args:
        ctx: Modular context
        z: Expansion point (not reduced; theta is only quasi-periodic)
        order: Highest Taylor order

    Returns:
        Jet with coeffs[k] = theta^{(k)}(z) / k!
    """
    if order > ctx.jet_cap:
        raise JetCapExceeded(f"theta jet of order {order} exceeds jet cap {ctx.jet_cap}")
    derivs = _theta_derivatives(ctx, np.asarray(z, dtype=complex), order)
    coeffs = tuple(complex(d) / math.factorial(k) for k, d in enumerate(derivs))
    return Jet(center=complex(z), order=order, coeffs=coeffs, lead_exponent=0)


def theta_logder(ctx: ModularContext, z: ArrayLike) -> ArrayLike:
    """theta'(z)/theta(z) at unreduced z (quasi-periodic)"""
    was_scalar = np.isscalar(z)
    z = np.asarray(z, dtype=complex)
    t0, t1 = _theta_derivatives(ctx, z, 1)
    return _scalar_or_array(t1 / t0, was_scalar)


def weierstrass_zeta(ctx: ModularContext, z: ArrayLike) -> ArrayLike:
    """Weierstrass zeta = theta'/theta + eta1 z"""
    was_scalar = np.isscalar(z)
    z = np.asarray(z, dtype=complex)
    t0, t1 = _theta_derivatives(ctx, z, 1)
    return _scalar_or_array(t1 / t0 + ctx.constants["eta1"] * z, was_scalar)


def _wp_and_derivative(ctx: ModularContext, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(wp, wp') at centered, pole-free u from theta log-derivatives"""
    t0, t1, t2, t3 = _theta_derivatives(ctx, u, 3)
    r1 = t1 / t0
    r2 = t2 / t0
    r3 = t3 / t0
    # L = theta'/theta; wp = -L' - eta1, wp' = -L''
    dL = r2 - r1 ** 2
    ddL = r3 - 3.0 * r2 * r1 + 2.0 * r1 ** 3
    return -dL - ctx.constants["eta1"], -ddL


def _wp_taylor(ctx: ModularContext, u: np.ndarray, order: int) -> List[np.ndarray]:
    """
    Taylor coefficients p_0..p_order of wp at u.

    Propagated from (wp, wp') with wp'' = 6 wp^2 - g2/2, i.e.
    (k+1)(k+2) p_{k+2} = 6 sum_{i+j=k} p_i p_j - (g2/2) [k = 0].
    """
    p0, d1 = _wp_and_derivative(ctx, u)
    coeffs = [p0, d1]
    g2 = ctx.constants["g2"]
    for k in range(0, order - 1):
        conv = sum(coeffs[i] * coeffs[k - i] for i in range(k + 1))
        nxt = 6.0 * conv
        if k == 0:
            nxt = nxt - g2 / 2.0
        coeffs.append(nxt / ((k + 1) * (k + 2)))
    return coeffs[:order + 1]


def wp_jet(ctx: ModularContext, u: ArrayLike, m: int) -> List[ArrayLike]:
    """
    Values [wp(u), wp'(u), ..., wp^{(m)}(u)]

    Args:
        ctx: Modular context
        u: Point(s), reduced internally
        m: Highest derivative order

    Returns:
        List of m + 1 derivative values

    Raises:
        JetCapExceeded: If m > ctx.jet_cap
        PoleAtLatticePoint: If u reduces to the lattice
    """
    if m > ctx.jet_cap:
        raise JetCapExceeded(f"wp derivative order {m} exceeds jet cap {ctx.jet_cap}")
    was_scalar = np.isscalar(u)
    u = _center(ctx, np.asarray(u, dtype=complex))
    _check_poles(ctx, u)
    taylor = _wp_taylor(ctx, u, max(m, 1))
    values = [math.factorial(k) * taylor[k] for k in range(m + 1)]
    return [_scalar_or_array(v, was_scalar) for v in values]


def wp_value(ctx: ModularContext, u: ArrayLike, m: int = 0) -> ArrayLike:
    """Single derivative wp^{(m)}(u)"""
    return wp_jet(ctx, u, m)[m]


def zhat_value(ctx: ModularContext, z: ArrayLike) -> ArrayLike:
    """
    Z-hat(z) = theta'(z)/theta(z) + 2 pi i im(z)/im(tau), doubly periodic

    Equal to zeta(z) - eta1hat z - (pi / im tau) conj(z).

    Raises:
        PoleAtLatticePoint: If z reduces to the lattice
    """
    was_scalar = np.isscalar(z)
    u = _center(ctx, np.asarray(z, dtype=complex))
    _check_poles(ctx, u)
    t0, t1 = _theta_derivatives(ctx, u, 1)
    value = t1 / t0 + 2j * np.pi * u.imag / ctx.tau.imag
    return _scalar_or_array(value, was_scalar)


def zhat_origin_coefficients(ctx: ModularContext, order: int) -> List[complex]:
    """
    Holomorphic Laurent coefficients of Z-hat at 0 for exponents -1..order:
    1/w - eta1hat w - sum_{k>=2} 2 G_{2k} w^{2k-1}
    """
    coeffs = []
    for e in range(-1, order + 1):
        if e == -1:
            coeffs.append(1 + 0j)
        elif e % 2 == 0:
            coeffs.append(0j)
        elif e == 1:
            coeffs.append(-ctx.constants["eta1hat"])
        else:
            coeffs.append(-2.0 * ctx.G((e + 1) // 2))
    return coeffs


def zhat_holo_jet(ctx: ModularContext, z: complex, order: int) -> Jet:
    """
    Holomorphic jet of Z-hat at z.

    The constant term is the true value (antiholomorphic content included);
    the w-bar linear term is dropped. At a lattice point the Laurent jet with
    lead exponent -1 is returned.

    Args:
        ctx: Modular context
        z: Expansion point
        order: Highest exponent

    Returns:
        Jet
    """
    if order > ctx.jet_cap:
        raise JetCapExceeded(f"Z-hat jet of order {order} exceeds jet cap {ctx.jet_cap}")

    u = complex(_center(ctx, np.asarray(z, dtype=complex)))
    if abs(u) < config.POLE_TOLERANCE:
        return Jet(center=complex(z), order=order,
                   coeffs=tuple(zhat_origin_coefficients(ctx, order)), lead_exponent=-1)

    coeffs = [complex(zhat_value(ctx, u))]
    if order >= 1:
        derivs = wp_jet(ctx, u, max(order - 1, 0))
        coeffs.append(-(derivs[0] + ctx.constants["eta1hat"]))
        for j in range(2, order + 1):
            coeffs.append(-derivs[j - 1] / math.factorial(j))
    return Jet(center=complex(z), order=order, coeffs=tuple(coeffs), lead_exponent=0)


def half_periods(ctx: ModularContext) -> Tuple[complex, complex, complex]:
    """(e1, e2, e3) = wp at 1/2, tau/2, (1+tau)/2"""
    points = np.array([0.5, ctx.tau / 2, (1 + ctx.tau) / 2], dtype=complex)
    values = wp_jet(ctx, points, 0)[0]
    return complex(values[0]), complex(values[1]), complex(values[2])


def lattice_eisenstein(tau: complex, k: int, n_inner: int = 2000, m_outer: int = 40) -> complex:
    """
    Full lattice sum sum'_{m} sum'_{n} (m tau + n)^{-2k} in Eisenstein order

    The inner sum runs over n for each m, with a midpoint tail correction;
    the outer sum over m converges geometrically. For k = 1 this is the
    conditionally convergent weight-2 value eta1 = (pi^2/3) E2.

    Args:
        tau: Modular parameter
        k: Half weight (weight 2k)
        n_inner: Inner truncation
        m_outer: Outer truncation

    Returns:
        Complex lattice sum (twice the half-sum G_{2k})
    """
    tau = complex(tau)
    power = 2 * k
    n = np.arange(-n_inner, n_inner + 1, dtype=float)
    total = 0j
    for m in range(-m_outer, m_outer + 1):
        x = m * tau
        terms = x + n
        if m == 0:
            terms = terms[n != 0]
        total += np.sum(terms ** (-power))
        # Tails beyond |n| = n_inner: midpoint rule plus first Euler-Maclaurin term
        hi = x + n_inner + 0.5
        lo = x - n_inner - 0.5
        total += (hi ** (1 - power) - lo ** (1 - power)) / (power - 1)
        total += power * (lo ** (-power - 1) - hi ** (-power - 1)) / 24.0
    return complex(total)


def s_transform(tau: complex) -> complex:
    """tau -> -1/tau"""
    return -1.0 / complex(tau)
