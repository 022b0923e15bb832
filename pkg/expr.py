"""
Symbolic integrands: normalized polynomials in the atoms wp^{(m)}(z_a - z_b),
Zhat(z_a - z_b) and named modular constants

Provides the integrand DSL parser, numeric evaluation through the elliptic
kernel, holomorphic differentiation, pole bookkeeping and Laurent expansion
with Expr coefficients.
"""

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

import config
from elliptic_kernel import (
    JetCapExceeded,
    ModularContext,
    PoleAtLatticePoint,
    wp_jet,
    zhat_value,
)
from laurent import CoefficientRing, LaurentSeries, product

Scalar = Union[int, float, complex]

ATOM_WP = "wp"
ATOM_ZHAT = "Z"
ATOM_CONST = "c"

# Relative size below which a merged coefficient counts as an exact cancellation
CANCELLATION_TOLERANCE = 1e-12


class ExprError(Exception):
    """Base exception for symbolic expression errors"""
    pass


class ExprSyntaxError(ExprError):
    """Malformed DSL input"""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnknownSymbol(ExprError):
    """Identifier that is neither an atom nor a known constant"""

    def __init__(self, symbol: str, offset: int):
        super().__init__(f"Unknown symbol '{symbol}' (at byte {offset})")
        self.symbol = symbol
        self.offset = offset


class SelfDifference(ExprError):
    """An atom argument of the form z_a - z_a"""
    pass


class PoleHit(ExprError):
    """Evaluation at a point where an atom has a pole"""

    def __init__(self, atom: "Atom", message: str = ""):
        super().__init__(message or f"Pole of {atom.label()} hit during evaluation")
        self.atom = atom


@dataclass(frozen=True, order=True)
class Atom:
    """
    wp^{(m)}(z_a - z_b), Zhat(z_a - z_b) or a named constant.

    Function atoms are stored with a < b; the parity sign of the flip lives in
    the term coefficient.
    """
    kind: str
    m: int = 0
    a: int = 0
    b: int = 0
    name: str = ""

    @property
    def is_function(self) -> bool:
        return self.kind != ATOM_CONST

    def involves(self, p: int) -> bool:
        return self.is_function and (self.a == p or self.b == p)

    def other(self, p: int) -> int:
        return self.b if self.a == p else self.a

    def pole_order(self) -> int:
        if self.kind == ATOM_WP:
            return self.m + 2
        if self.kind == ATOM_ZHAT:
            return 1
        return 0

    def label(self) -> str:
        if self.kind == ATOM_WP:
            return f"wp{chr(39) * self.m}({self.a}-{self.b})"
        if self.kind == ATOM_ZHAT:
            return f"Z({self.a}-{self.b})"
        return self.name


def make_wp(m: int, a: int, b: int) -> Tuple[int, Atom]:
    """(sign, atom) for wp^{(m)}(z_a - z_b) in canonical orientation"""
    if a == b:
        raise SelfDifference(f"wp argument z{a} - z{b} is identically zero")
    if a < b:
        return 1, Atom(ATOM_WP, m, a, b)
    return (-1) ** m, Atom(ATOM_WP, m, b, a)


def make_zhat(a: int, b: int) -> Tuple[int, Atom]:
    """(sign, atom) for Zhat(z_a - z_b) in canonical orientation"""
    if a == b:
        raise SelfDifference(f"Z argument z{a} - z{b} is identically zero")
    if a < b:
        return 1, Atom(ATOM_ZHAT, 0, a, b)
    return -1, Atom(ATOM_ZHAT, 0, b, a)


def make_const(name: str) -> Atom:
    return Atom(ATOM_CONST, name=name)


Monomial = Tuple[Atom, ...]


@dataclass(frozen=True)
class Term:
    """coeff times the product of atoms"""
    coeff: complex
    atoms: Monomial


def _accumulate(target: Dict[Monomial, complex], mono: Monomial, coeff: complex):
    if coeff == 0:
        return
    old = target.get(mono, 0j)
    new = old + coeff
    if new == 0 or abs(new) <= CANCELLATION_TOLERANCE * max(abs(old), abs(coeff)):
        target.pop(mono, None)
    else:
        target[mono] = new


def _merge(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    return tuple(sorted(m1 + m2))


class Expr:
    """
    Normalized sum of terms coeff * prod(atoms).

    Immutable value; like monomials are merged and zero coefficients dropped.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Optional[Mapping[Monomial, Scalar]] = None):
        normalized: Dict[Monomial, complex] = {}
        for mono, coeff in (terms or {}).items():
            _accumulate(normalized, tuple(sorted(mono)), complex(coeff))
        self._terms = normalized

    @classmethod
    def _raw(cls, terms: Dict[Monomial, complex]) -> "Expr":
        expr = cls.__new__(cls)
        expr._terms = terms
        return expr

    # --- constructors ---

    @classmethod
    def zero(cls) -> "Expr":
        return cls._raw({})

    @classmethod
    def scalar(cls, c: Scalar) -> "Expr":
        return cls({(): c})

    @classmethod
    def const(cls, name: str) -> "Expr":
        return cls._raw({(make_const(name),): 1 + 0j})

    @classmethod
    def wp(cls, m: int, a: int, b: int) -> "Expr":
        sign, atom = make_wp(m, a, b)
        return cls._raw({(atom,): complex(sign)})

    @classmethod
    def zhat(cls, a: int, b: int) -> "Expr":
        sign, atom = make_zhat(a, b)
        return cls._raw({(atom,): complex(sign)})

    @classmethod
    def from_atom(cls, atom: Atom) -> "Expr":
        return cls._raw({(atom,): 1 + 0j})

    # --- inspection ---

    @property
    def terms(self) -> List[Term]:
        return [Term(c, mono) for mono, c in sorted(self._terms.items(), key=lambda kv: kv[0])]

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def is_numeric(self) -> bool:
        """No atoms at all"""
        return all(not mono for mono in self._terms)

    @property
    def is_constant(self) -> bool:
        """Only constant-symbol atoms, so independent of every point"""
        return all(not atom.is_function for mono in self._terms for atom in mono)

    def scalar_value(self) -> complex:
        if not self.is_numeric:
            raise ExprError("Expression is not a plain number")
        return self._terms.get((), 0j)

    @property
    def points(self) -> set:
        found = set()
        for mono in self._terms:
            for atom in mono:
                if atom.is_function:
                    found.update((atom.a, atom.b))
        return found

    def depends_on(self, p: int) -> bool:
        return any(atom.involves(p) for mono in self._terms for atom in mono)

    def split(self, p: int) -> Tuple["Expr", "Expr"]:
        """(terms involving z_p, terms free of z_p)"""
        dep, free = {}, {}
        for mono, c in self._terms.items():
            target = dep if any(atom.involves(p) for atom in mono) else free
            target[mono] = c
        return Expr._raw(dep), Expr._raw(free)

    # --- arithmetic ---

    @staticmethod
    def _coerce(other) -> "Expr":
        if isinstance(other, Expr):
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return Expr.scalar(other)
        return NotImplemented

    def __add__(self, other) -> "Expr":
        other = Expr._coerce(other)
        if other is NotImplemented:
            return other
        result = dict(self._terms)
        for mono, c in other._terms.items():
            _accumulate(result, mono, c)
        return Expr._raw(result)

    __radd__ = __add__

    def __neg__(self) -> "Expr":
        return Expr._raw({mono: -c for mono, c in self._terms.items()})

    def __sub__(self, other) -> "Expr":
        other = Expr._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "Expr":
        return (-self) + other

    def __mul__(self, other) -> "Expr":
        if isinstance(other, (int, float, complex, np.number)):
            if other == 0:
                return Expr.zero()
            return Expr._raw({mono: c * other for mono, c in self._terms.items()})
        other = Expr._coerce(other)
        if other is NotImplemented:
            return other
        result: Dict[Monomial, complex] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                _accumulate(result, _merge(m1, m2), c1 * c2)
        return Expr._raw(result)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Expr":
        if not isinstance(k, int) or k < 0:
            raise ExprError("Only non-negative integer powers are supported")
        result = Expr.scalar(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, Expr):
            return NotImplemented
        return self._terms == other._terms

    __hash__ = None

    def is_close(self, other: "Expr", rel_tol: float = 1e-12) -> bool:
        """Same monomials with coefficients equal to rel_tol"""
        if set(self._terms) != set(other._terms):
            return False
        return all(abs(c - other._terms[m]) <= rel_tol * max(abs(c), 1.0)
                   for m, c in self._terms.items())

    def __repr__(self) -> str:
        parts = []
        for term in self.terms:
            labels = "*".join(atom.label() for atom in term.atoms)
            parts.append(f"{term.coeff}{'*' + labels if labels else ''}")
        return f"Expr({' + '.join(parts) or '0'})"

    # --- operations ---

    def evaluate(self, ctx: ModularContext, assign: Mapping[int, Union[complex, np.ndarray]]):
        return evaluate(self, ctx, assign)

    def differentiate(self, p: int) -> "Expr":
        return differentiate(self, p)

    def poles_in(self, p: int) -> List[Tuple[int, int]]:
        return poles_in(self, p)


class ExprRing(CoefficientRing):
    """Expr as a LaurentSeries coefficient ring"""
    name = "expr"

    def zero(self) -> Expr:
        return Expr.zero()

    def one(self) -> Expr:
        return Expr.scalar(1)

    def add(self, a: Expr, b: Expr) -> Expr:
        return a + b

    def neg(self, a: Expr) -> Expr:
        return -a

    def mul(self, a: Expr, b: Expr) -> Expr:
        return a * b

    def is_zero(self, a: Expr) -> bool:
        return a.is_zero

    def div_int(self, a: Expr, n: int) -> Expr:
        return a * (1.0 / n)

    def from_int(self, n: int) -> Expr:
        return Expr.scalar(n)


EXPR_RING = ExprRing()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _point(assign: Mapping[int, Union[complex, np.ndarray]], p: int):
    try:
        return assign[p]
    except KeyError:
        raise ExprError(f"Point z{p} is not assigned")


def evaluate(E: Expr, ctx: ModularContext, assign: Mapping[int, Union[complex, np.ndarray]]):
    """
    Numeric value of E

    Args:
        E: Expression
        ctx: Modular context resolving atoms and constants
        assign: Point index -> complex value (or numpy array, broadcast)

    Returns:
        complex, or numpy array when an assignment is an array

    Raises:
        PoleHit: If an atom argument reduces to a lattice point
    """
    # Highest derivative per wp argument so each pair is jetted once
    wp_orders: Dict[Tuple[int, int], int] = {}
    for mono in E._terms:
        for atom in mono:
            if atom.kind == ATOM_WP:
                key = (atom.a, atom.b)
                wp_orders[key] = max(wp_orders.get(key, 0), atom.m)

    wp_cache: Dict[Tuple[int, int], list] = {}
    zhat_cache: Dict[Tuple[int, int], object] = {}

    def atom_value(atom: Atom):
        if atom.kind == ATOM_CONST:
            return ctx.constant(atom.name)
        key = (atom.a, atom.b)
        u = _point(assign, atom.a) - _point(assign, atom.b)
        try:
            if atom.kind == ATOM_WP:
                if key not in wp_cache:
                    wp_cache[key] = wp_jet(ctx, u, wp_orders[key])
                return wp_cache[key][atom.m]
            if key not in zhat_cache:
                zhat_cache[key] = zhat_value(ctx, u)
            return zhat_cache[key]
        except PoleAtLatticePoint as e:
            raise PoleHit(atom, f"{atom.label()} evaluated at a lattice point ({e})")

    total = 0j
    for mono, coeff in E._terms.items():
        value = coeff
        for atom in mono:
            value = value * atom_value(atom)
        total = total + value
    return total


# ---------------------------------------------------------------------------
# Differentiation and pole bookkeeping
# ---------------------------------------------------------------------------

def differentiate(E: Expr, p: int) -> Expr:
    """
    Holomorphic derivative d/dz_p.

    d wp^{(m)}(u)/du = wp^{(m+1)}(u) and d Zhat(u)/du = -wp(u) - eta1hat, with
    du/dz_p = +1 for the minuend and -1 for the subtrahend.
    """
    eta = make_const("eta1h")
    result: Dict[Monomial, complex] = {}
    for mono, c in E._terms.items():
        for i, atom in enumerate(mono):
            if not atom.involves(p):
                continue
            s = 1 if atom.a == p else -1
            rest = mono[:i] + mono[i + 1:]
            if atom.kind == ATOM_WP:
                bumped = Atom(ATOM_WP, atom.m + 1, atom.a, atom.b)
                _accumulate(result, tuple(sorted(rest + (bumped,))), c * s)
            else:
                wp0 = Atom(ATOM_WP, 0, atom.a, atom.b)
                _accumulate(result, tuple(sorted(rest + (wp0,))), -c * s)
                _accumulate(result, tuple(sorted(rest + (eta,))), -c * s)
    return Expr._raw(result)


def term_pole_order(mono: Monomial, p: int, q: int) -> int:
    """Pole order of one monomial at z_p = z_q"""
    return sum(atom.pole_order() for atom in mono if atom.involves(p) and atom.other(p) == q)


def poles_in(E: Expr, p: int) -> List[Tuple[int, int]]:
    """
    Worst-case pole order of E at z_p = z_q for every other point q

    Returns:
        Sorted list of (q, max_order) with max_order > 0
    """
    orders: Dict[int, int] = {}
    for mono in E._terms:
        per_point: Dict[int, int] = {}
        for atom in mono:
            if atom.involves(p):
                q = atom.other(p)
                per_point[q] = per_point.get(q, 0) + atom.pole_order()
        for q, order in per_point.items():
            orders[q] = max(orders.get(q, 0), order)
    return sorted(orders.items())


# ---------------------------------------------------------------------------
# Laurent expansion
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def eisenstein_expr(k: int) -> Expr:
    """G_{2k} as a polynomial in the G4, G6 tokens"""
    if k == 2:
        return Expr.const("G4")
    if k == 3:
        return Expr.const("G6")
    if k < 2:
        raise ValueError("G_{2k} is defined here for k >= 2")
    c = {m: eisenstein_expr(m) * (2 * (2 * m - 1)) for m in range(2, k - 1)}
    acc = Expr.zero()
    for m in range(2, k - 1):
        acc = acc + c[m] * c[k - m]
    ck = acc * (3.0 / ((2 * k + 1) * (k - 3)))
    return ck * (1.0 / (2 * (2 * k - 1)))


@lru_cache(maxsize=None)
def origin_zhat_series(trunc: int) -> LaurentSeries:
    """Zhat(w) = 1/w - eta1hat w - sum_{k>=2} 2 G_{2k} w^{2k-1}, holomorphic part"""
    coeffs = []
    for e in range(-1, trunc + 1):
        if e == -1:
            coeffs.append(Expr.scalar(1))
        elif e % 2 == 0:
            coeffs.append(Expr.zero())
        elif e == 1:
            coeffs.append(-Expr.const("eta1h"))
        else:
            coeffs.append(eisenstein_expr((e + 1) // 2) * -2)
    return LaurentSeries(EXPR_RING, -1, coeffs, trunc)


@lru_cache(maxsize=None)
def origin_wp_series(m: int, trunc: int) -> LaurentSeries:
    """wp^{(m)}(w) at the origin, from wp = -Zhat' - eta1hat"""
    zhat = origin_zhat_series(trunc + m + 1)
    series = -zhat.differentiate() - LaurentSeries.constant(EXPR_RING, Expr.const("eta1h"), trunc + m)
    for _ in range(m):
        series = series.differentiate()
    return series.truncate(trunc)


def expand_atom(atom: Atom, p: int, q: int, trunc: int, jet_cap: Optional[int] = None) -> LaurentSeries:
    """
    Series of a single atom under z_p = z_q + w, known through w^trunc

    Args:
        atom: Atom to expand
        p: Point being displaced
        q: Expansion point
        trunc: Truncation order
        jet_cap: Maximum derivative order (defaults to config)

    Returns:
        LaurentSeries with Expr coefficients
    """
    jet_cap = jet_cap or config.get_jet_cap()
    if not atom.involves(p):
        return LaurentSeries.constant(EXPR_RING, Expr.from_atom(atom), trunc)

    # u = s * w + (z_q - z_other) or (z_other - z_q)
    s = 1 if atom.a == p else -1
    other = atom.other(p)

    if other == q:
        if trunc > jet_cap:
            raise JetCapExceeded(f"Laurent expansion to w^{trunc} exceeds jet cap {jet_cap}")
        if atom.kind == ATOM_WP:
            series = origin_wp_series(atom.m, trunc)
            return series.scale(Expr.scalar(s ** atom.m)) if s ** atom.m != 1 else series
        series = origin_zhat_series(trunc)
        return series if s == 1 else -series

    new_a, new_b = (q, other) if s == 1 else (other, q)
    coeffs = []
    if atom.kind == ATOM_WP:
        if atom.m + trunc > jet_cap:
            raise JetCapExceeded(
                f"Taylor expansion needs wp^({atom.m + trunc}), beyond jet cap {jet_cap}"
            )
        for j in range(trunc + 1):
            coeffs.append(Expr.wp(atom.m + j, new_a, new_b) * (s ** j / math.factorial(j)))
        return LaurentSeries(EXPR_RING, 0, coeffs, trunc)

    if trunc - 1 > jet_cap:
        raise JetCapExceeded(f"Taylor expansion of Z needs wp^({trunc - 1}), beyond jet cap {jet_cap}")
    coeffs.append(Expr.zhat(new_a, new_b))
    if trunc >= 1:
        coeffs.append((Expr.wp(0, new_a, new_b) + Expr.const("eta1h")) * (-s))
    for j in range(2, trunc + 1):
        coeffs.append(Expr.wp(j - 1, new_a, new_b) * (-(s ** j) / math.factorial(j)))
    return LaurentSeries(EXPR_RING, 0, coeffs, trunc)


def expand_monomial(mono: Monomial, coeff: complex, p: int, q: int, order: int,
                    jet_cap: Optional[int] = None) -> LaurentSeries:
    """One term's series through w^order; each factor is expanded just far enough"""
    total_pole = term_pole_order(mono, p, q)
    factors = []
    for atom in mono:
        own = atom.pole_order() if atom.involves(p) and atom.other(p) == q else 0
        factors.append(expand_atom(atom, p, q, order + total_pole - own, jet_cap))
    series = product(EXPR_RING, factors, order)
    return series.scale(Expr.scalar(coeff)).truncate(order)


def laurent_expand(E: Expr, p: int, q: int, order: int, jet_cap: Optional[int] = None) -> LaurentSeries:
    """
    Expand E at z_p = z_q + w through w^order

    Args:
        E: Expression
        p: Displaced point
        q: Expansion point (q != p)
        order: Truncation order of the result
        jet_cap: Maximum derivative order

    Returns:
        LaurentSeries over EXPR_RING

    Raises:
        JetCapExceeded: If a factor needs more derivatives than the cap
    """
    if p == q:
        raise SelfDifference(f"Cannot expand z{p} around itself")
    jet_cap = jet_cap or config.get_jet_cap()
    if order > jet_cap:
        raise JetCapExceeded(f"Expansion order {order} exceeds jet cap {jet_cap}")

    total = LaurentSeries.zero(EXPR_RING, order)
    for mono, coeff in E._terms.items():
        total = total + expand_monomial(mono, coeff, p, q, order, jet_cap)
    return total.truncate(order)


# ---------------------------------------------------------------------------
# DSL parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),'])"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise ExprSyntaxError(f"Unexpected character {text[pos]!r}", len(text[:pos].encode()))
        kind = match.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, match.group(), len(text[:pos].encode())))
        pos = match.end()
    tokens.append(_Token("end", "", len(text.encode())))
    return tokens


class _Parser:
    """Recursive descent over the integrand grammar"""

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> _Token:
        token = self.peek()
        self.pos += 1
        return token

    def expect(self, text: str) -> _Token:
        token = self.peek()
        if token.text != text:
            found = token.text or "end of input"
            raise ExprSyntaxError(f"Expected '{text}', found '{found}'", token.offset)
        return self.advance()

    def parse(self) -> Expr:
        result = self.expr()
        token = self.peek()
        if token.kind != "end":
            raise ExprSyntaxError(f"Unexpected '{token.text}'", token.offset)
        return result

    def expr(self) -> Expr:
        sign = 1
        if self.peek().text in ("+", "-"):
            sign = -1 if self.advance().text == "-" else 1
        result = self.term() * sign
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            rhs = self.term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term(self) -> Expr:
        result = self.factor()
        while self.peek().text in ("*", "/"):
            op = self.advance()
            rhs = self.factor()
            if op.text == "*":
                result = result * rhs
            else:
                if not rhs.is_numeric:
                    raise ExprSyntaxError("Division is only allowed by plain numbers", op.offset)
                divisor = rhs.scalar_value()
                if divisor == 0:
                    raise ExprSyntaxError("Division by zero", op.offset)
                result = result * (1.0 / divisor)
        return result

    def factor(self) -> Expr:
        if self.peek().text in ("+", "-"):
            negate = self.advance().text == "-"
            inner = self.factor()
            return -inner if negate else inner
        base = self.base()
        if self.peek().text == "^":
            self.advance()
            base = base ** self.uint()
        return base

    def uint(self) -> int:
        token = self.peek()
        if token.kind != "number" or not token.text.isdigit():
            raise ExprSyntaxError(f"Expected a non-negative integer, found '{token.text}'", token.offset)
        self.advance()
        return int(token.text)

    def point(self) -> int:
        token = self.peek()
        value = self.uint()
        if value < 1:
            raise ExprSyntaxError("Point indices are 1-based", token.offset)
        return value

    def signed_decimal(self) -> float:
        sign = 1.0
        if self.peek().text in ("+", "-"):
            sign = -1.0 if self.advance().text == "-" else 1.0
        token = self.peek()
        if token.kind != "number":
            raise ExprSyntaxError(f"Expected a number, found '{token.text}'", token.offset)
        self.advance()
        return sign * float(token.text)

    def is_complex_literal(self) -> bool:
        ahead = 1
        if self.peek(ahead).text in ("+", "-"):
            ahead += 1
        return self.peek(ahead).kind == "number" and self.peek(ahead + 1).text == ","

    def base(self) -> Expr:
        token = self.peek()
        if token.kind == "number":
            self.advance()
            return Expr.scalar(float(token.text))

        if token.text == "(":
            if self.is_complex_literal():
                self.advance()
                re_part = self.signed_decimal()
                self.expect(",")
                im_part = self.signed_decimal()
                self.expect(")")
                return Expr.scalar(complex(re_part, im_part))
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner

        if token.kind == "name":
            self.advance()
            if token.text == "wp":
                order = 0
                while self.peek().text == "'":
                    self.advance()
                    order += 1
                a, b = self.argument()
                return Expr.wp(order, a, b)
            if token.text == "Z":
                a, b = self.argument()
                return Expr.zhat(a, b)
            if token.text in config.DSL_CONSTANTS:
                return Expr.const(token.text)
            raise UnknownSymbol(token.text, token.offset)

        found = token.text or "end of input"
        raise ExprSyntaxError(f"Unexpected '{found}'", token.offset)

    def argument(self) -> Tuple[int, int]:
        start = self.expect("(")
        a = self.point()
        self.expect("-")
        b = self.point()
        self.expect(")")
        if a == b:
            raise SelfDifference(f"Atom argument z{a} - z{b} at byte {start.offset} is identically zero")
        return a, b


def parse(text: str) -> Expr:
    """
    Parse the integrand DSL into a normalized Expr

    Raises:
        ExprSyntaxError: Malformed input (carries the byte offset)
        UnknownSymbol: Unrecognized identifier
        SelfDifference: Atom argument like wp(1-1)
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _render_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _render_coeff(c: complex) -> Tuple[str, str]:
    """(sign, magnitude text); complex coefficients keep their signs inside the literal"""
    if c.imag == 0:
        sign = "-" if c.real < 0 else ""
        return sign, _render_number(abs(c.real))
    return "", f"({_render_number(c.real)},{_render_number(c.imag)})"


def _render_atoms(mono: Monomial) -> List[str]:
    parts = []
    i = 0
    while i < len(mono):
        j = i
        while j < len(mono) and mono[j] == mono[i]:
            j += 1
        label = mono[i].label()
        parts.append(label if j - i == 1 else f"{label}^{j - i}")
        i = j
    return parts


def render_expr(E: Expr) -> str:
    """
    DSL text for E; parse(render_expr(E)) == E

    Examples:
        "wp(1-2)*wp(2-3)", "-0.25*g2*eta1h + 0.1*g3"
    """
    pieces = []
    for term in E.terms:
        sign, magnitude = _render_coeff(term.coeff)
        factors = _render_atoms(term.atoms)
        if factors and magnitude == "1":
            body = "*".join(factors)
        else:
            body = "*".join([magnitude] + factors)
        pieces.append((sign, body))

    if not pieces:
        return "0"
    sign, body = pieces[0]
    text = f"{sign}{body}"
    for sign, body in pieces[1:]:
        text += f" - {body}" if sign else f" + {body}"
    return text
