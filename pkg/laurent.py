"""
Truncated Laurent series in one formal variable w over a pluggable coefficient ring

A series stores coefficients for exponents lead_exponent..trunc_order; every
coefficient beyond trunc_order is unknown and never read. The same engine serves
numeric jets (ComplexRing) and symbolic coefficients (expr.ExprRing).
"""

from typing import Any, Callable, List, Optional, Sequence

from elliptic_kernel import Jet


class LaurentError(Exception):
    """Base exception for Laurent series arithmetic"""
    pass


class TruncationUnderflow(LaurentError):
    """The result would have no representable coefficients"""
    pass


class BeyondTruncation(LaurentError):
    """A coefficient past the truncation order was requested"""
    pass


class SeriesDivisionError(LaurentError):
    """Series inversion is not supported"""
    pass


class CoefficientRing:
    """
    Operations a coefficient ring supplies to LaurentSeries.

    Subclasses provide zero/one and add, neg, mul; div_int is optional.
    """
    name = "ring"

    def zero(self) -> Any:
        raise NotImplementedError

    def one(self) -> Any:
        raise NotImplementedError

    def add(self, a: Any, b: Any) -> Any:
        raise NotImplementedError

    def neg(self, a: Any) -> Any:
        raise NotImplementedError

    def mul(self, a: Any, b: Any) -> Any:
        raise NotImplementedError

    def is_zero(self, a: Any) -> bool:
        raise NotImplementedError

    def div_int(self, a: Any, n: int) -> Any:
        raise LaurentError(f"{self.name} does not support integer division")

    def from_int(self, n: int) -> Any:
        """n * one, by repeated doubling"""
        result = self.zero()
        base = self.one() if n >= 0 else self.neg(self.one())
        n = abs(n)
        while n:
            if n & 1:
                result = self.add(result, base)
            base = self.add(base, base)
            n >>= 1
        return result

    def sum(self, items) -> Any:
        total = self.zero()
        for item in items:
            total = self.add(total, item)
        return total


class ComplexRing(CoefficientRing):
    """Double-precision complex coefficients"""
    name = "complex"

    def zero(self) -> complex:
        return 0j

    def one(self) -> complex:
        return 1 + 0j

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def is_zero(self, a) -> bool:
        return a == 0

    def div_int(self, a, n: int):
        return a / n

    def from_int(self, n: int) -> complex:
        return complex(n)


COMPLEX = ComplexRing()


class LaurentSeries:
    """
    c_lead w^lead + ... + c_trunc w^trunc + O(w^{trunc+1})

    Immutable. After normalization the leading coefficient is nonzero, or the
    series is the canonical zero with lead_exponent = trunc_order + 1.
    """

    __slots__ = ("ring", "lead_exponent", "coeffs", "trunc_order")

    def __init__(self, ring: CoefficientRing, lead_exponent: int, coeffs: Sequence[Any],
                 trunc_order: Optional[int] = None, normalize: bool = True):
        if trunc_order is None:
            trunc_order = lead_exponent + len(coeffs) - 1
        if trunc_order < lead_exponent - 1:
            raise TruncationUnderflow(
                f"Truncation order {trunc_order} below lead exponent {lead_exponent}"
            )
        coeffs = list(coeffs[:max(trunc_order - lead_exponent + 1, 0)])
        while len(coeffs) < trunc_order - lead_exponent + 1:
            coeffs.append(ring.zero())

        if normalize:
            strip = 0
            while strip < len(coeffs) and ring.is_zero(coeffs[strip]):
                strip += 1
            coeffs = coeffs[strip:]
            lead_exponent += strip

        self.ring = ring
        self.lead_exponent = lead_exponent
        self.coeffs = tuple(coeffs)
        self.trunc_order = trunc_order

    # --- constructors ---

    @classmethod
    def zero(cls, ring: CoefficientRing, trunc_order: int) -> "LaurentSeries":
        return cls(ring, trunc_order + 1, [], trunc_order)

    @classmethod
    def constant(cls, ring: CoefficientRing, c: Any, trunc_order: int) -> "LaurentSeries":
        return cls.monomial(ring, c, 0, trunc_order)

    @classmethod
    def monomial(cls, ring: CoefficientRing, c: Any, k: int, trunc_order: int) -> "LaurentSeries":
        """c w^k, known through trunc_order"""
        if trunc_order < k:
            return cls.zero(ring, trunc_order)
        return cls(ring, k, [c], trunc_order)

    @classmethod
    def from_jet(cls, jet: Jet) -> "LaurentSeries":
        """Complex series from a kernel jet"""
        return cls(COMPLEX, jet.lead_exponent, list(jet.coeffs), jet.order)

    # --- inspection ---

    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def coefficient(self, k: int) -> Any:
        """
        Coefficient of w^k

        Raises:
            BeyondTruncation: If k > trunc_order
        """
        if k > self.trunc_order:
            raise BeyondTruncation(f"w^{k} requested, series known through w^{self.trunc_order}")
        if k < self.lead_exponent:
            return self.ring.zero()
        return self.coeffs[k - self.lead_exponent]

    def residue(self) -> Any:
        """Coefficient of w^-1"""
        return self.coefficient(-1)

    def terms(self):
        """(exponent, coefficient) pairs with nonzero coefficient"""
        for offset, c in enumerate(self.coeffs):
            if not self.ring.is_zero(c):
                yield self.lead_exponent + offset, c

    # --- arithmetic ---

    def _check_ring(self, other: "LaurentSeries"):
        if other.ring is not self.ring:
            raise LaurentError(f"Ring mismatch: {self.ring.name} vs {other.ring.name}")

    def __add__(self, other: "LaurentSeries") -> "LaurentSeries":
        self._check_ring(other)
        ring = self.ring
        trunc = min(self.trunc_order, other.trunc_order)
        lead = min(self.lead_exponent, other.lead_exponent, trunc + 1)
        coeffs = []
        for k in range(lead, trunc + 1):
            coeffs.append(ring.add(self.coefficient(k), other.coefficient(k)))
        return LaurentSeries(ring, lead, coeffs, trunc)

    def __neg__(self) -> "LaurentSeries":
        ring = self.ring
        return LaurentSeries(ring, self.lead_exponent, [ring.neg(c) for c in self.coeffs],
                             self.trunc_order, normalize=False)

    def __sub__(self, other: "LaurentSeries") -> "LaurentSeries":
        return self + (-other)

    def __mul__(self, other: "LaurentSeries") -> "LaurentSeries":
        self._check_ring(other)
        ring = self.ring
        lead = self.lead_exponent + other.lead_exponent
        trunc = min(self.trunc_order + other.lead_exponent,
                    other.trunc_order + self.lead_exponent)
        if trunc < lead:
            return LaurentSeries.zero(ring, trunc)

        coeffs = []
        for k in range(lead, trunc + 1):
            acc = ring.zero()
            # i runs over exponents of self with a partner in other
            i_lo = max(self.lead_exponent, k - other.trunc_order)
            i_hi = min(self.trunc_order, k - other.lead_exponent)
            for i in range(i_lo, i_hi + 1):
                a = self.coeffs[i - self.lead_exponent]
                b = other.coeffs[k - i - other.lead_exponent]
                acc = ring.add(acc, ring.mul(a, b))
            coeffs.append(acc)
        return LaurentSeries(ring, lead, coeffs, trunc)

    def scale(self, c: Any) -> "LaurentSeries":
        ring = self.ring
        return LaurentSeries(ring, self.lead_exponent, [ring.mul(c, a) for a in self.coeffs],
                             self.trunc_order)

    def __pow__(self, k: int) -> "LaurentSeries":
        if k < 0:
            raise SeriesDivisionError("Negative powers require series inversion")
        if k == 0:
            # Relative precision of self carries over to the unit
            known = self.trunc_order - self.lead_exponent if not self.is_zero() else 0
            return LaurentSeries.constant(self.ring, self.ring.one(), known)
        result = None
        base = self
        while k:
            if k & 1:
                result = base if result is None else result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __truediv__(self, other):
        raise SeriesDivisionError("Laurent series division is not supported; integrands are polynomial in atoms")

    def divide_by_integer(self, n: int) -> "LaurentSeries":
        if n == 0:
            raise ZeroDivisionError("divide_by_integer by zero")
        ring = self.ring
        return LaurentSeries(ring, self.lead_exponent, [ring.div_int(c, n) for c in self.coeffs],
                             self.trunc_order)

    def differentiate(self) -> "LaurentSeries":
        """Term-wise d/dw"""
        ring = self.ring
        coeffs = []
        for offset, c in enumerate(self.coeffs):
            k = self.lead_exponent + offset
            coeffs.append(ring.mul(ring.from_int(k), c))
        return LaurentSeries(ring, self.lead_exponent - 1, coeffs, self.trunc_order - 1)

    def truncate(self, trunc_order: int) -> "LaurentSeries":
        """Forget coefficients beyond trunc_order"""
        if trunc_order >= self.trunc_order:
            return self
        lead = min(self.lead_exponent, trunc_order + 1)
        return LaurentSeries(self.ring, lead, self.coeffs[:max(trunc_order - lead + 1, 0)], trunc_order)

    def format_lines(self, render: Callable[[Any], str] = str) -> List[str]:
        """One 'c_k · w^k' line per nonzero coefficient"""
        lines = [f"{render(c)} · w^{k}" for k, c in self.terms()]
        lines.append(f"O(w^{self.trunc_order + 1})")
        return lines

    def __repr__(self) -> str:
        body = " + ".join(f"({c})w^{k}" for k, c in self.terms()) or "0"
        return f"LaurentSeries[{self.ring.name}]({body} + O(w^{self.trunc_order + 1}))"


def add(S: LaurentSeries, T: LaurentSeries) -> LaurentSeries:
    return S + T


def mul(S: LaurentSeries, T: LaurentSeries) -> LaurentSeries:
    return S * T


def scale(c: Any, S: LaurentSeries) -> LaurentSeries:
    return S.scale(c)


def int_pow(S: LaurentSeries, k: int) -> LaurentSeries:
    return S ** k


def divide_by_integer(S: LaurentSeries, n: int) -> LaurentSeries:
    return S.divide_by_integer(n)


def coefficient(S: LaurentSeries, k: int) -> Any:
    return S.coefficient(k)


def residue(S: LaurentSeries) -> Any:
    return S.residue()


def differentiate(S: LaurentSeries) -> LaurentSeries:
    return S.differentiate()


def product(ring: CoefficientRing, factors: List[LaurentSeries], trunc_order: int) -> LaurentSeries:
    """Product of factors, or the constant one when empty"""
    if not factors:
        return LaurentSeries.constant(ring, ring.one(), trunc_order)
    result = factors[0]
    for factor in factors[1:]:
        result = result * factor
    return result
