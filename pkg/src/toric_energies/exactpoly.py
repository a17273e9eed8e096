"""Exact polynomial algebra over the rationals.

Two representations are provided:

  UniPoly  dense coefficient tuple, index = degree
  BiPoly   sparse map (i, j) -> coefficient for x**i * y**j

Coefficients are ``fractions.Fraction`` everywhere; no floating point is
used in this module.  Both classes are immutable and always held in
canonical form (no trailing zeros / no stored zero terms), so ``==`` is
polynomial equality.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb
from typing import Dict, Iterable, Mapping, Tuple, Union

Scalar = Union[int, Fraction]


def _frac(c: Scalar) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


class UniPoly:
    """Dense univariate polynomial with rational coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Scalar] = ()):
        cs = [_frac(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs: Tuple[Fraction, ...] = tuple(cs)

    @classmethod
    def x(cls) -> "UniPoly":
        return cls([0, 1])

    @classmethod
    def const(cls, c: Scalar) -> "UniPoly":
        return cls([c])

    @property
    def degree(self) -> int:
        """Degree; the zero polynomial has degree -1."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def lead(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = UniPoly.const(other)
        if not isinstance(other, UniPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        if not self.coeffs:
            return "UniPoly(0)"
        terms = [f"{c}*x^{i}" for i, c in enumerate(self.coeffs) if c != 0]
        return "UniPoly(" + " + ".join(terms) + ")"

    def _coerce(self, other) -> "UniPoly":
        if isinstance(other, UniPoly):
            return other
        if isinstance(other, (int, Fraction)):
            return UniPoly.const(other)
        return NotImplemented

    def __add__(self, other) -> "UniPoly":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return UniPoly(p + q for p, q in zip(a, b))

    __radd__ = __add__

    def __neg__(self) -> "UniPoly":
        return UniPoly(-c for c in self.coeffs)

    def __sub__(self, other) -> "UniPoly":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "UniPoly":
        return (-self) + other

    def __mul__(self, other) -> "UniPoly":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_zero() or other.is_zero():
            return UniPoly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return UniPoly(out)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "UniPoly":
        if not isinstance(e, int) or e < 0:
            raise ValueError(f"exponent must be a nonnegative integer, got {e!r}")
        result = UniPoly.const(1)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __call__(self, at: Scalar) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * at + c
        return acc

    def compose(self, inner: "UniPoly") -> "UniPoly":
        """Return self(inner(x))."""
        acc = UniPoly()
        for c in reversed(self.coeffs):
            acc = acc * inner + c
        return acc

    def derivative(self, order: int = 1) -> "UniPoly":
        if order < 0:
            raise ValueError("derivative order must be >= 0")
        cs = list(self.coeffs)
        for _ in range(order):
            cs = [i * c for i, c in enumerate(cs)][1:]
        return UniPoly(cs)

    def divmod(self, other: "UniPoly") -> Tuple["UniPoly", "UniPoly"]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = other.degree
        lead = other.lead
        quot = [Fraction(0)] * max(len(rem) - dq, 0)
        for k in range(len(rem) - 1, dq - 1, -1):
            c = rem[k] / lead
            if c == 0:
                continue
            quot[k - dq] = c
            for j, b in enumerate(other.coeffs):
                rem[k - dq + j] -= c * b
        return UniPoly(quot), UniPoly(rem[:dq] if dq > 0 else [])

    def __mod__(self, other: "UniPoly") -> "UniPoly":
        return self.divmod(other)[1]

    def __floordiv__(self, other: "UniPoly") -> "UniPoly":
        return self.divmod(other)[0]

    def monic(self) -> "UniPoly":
        if self.is_zero():
            return self
        return UniPoly(c / self.lead for c in self.coeffs)


def poly_gcd(a: UniPoly, b: UniPoly) -> UniPoly:
    """Monic gcd by the Euclidean algorithm."""
    while not b.is_zero():
        a, b = b, a % b
    return a.monic()


class BiPoly:
    """Sparse polynomial in two variables ``x`` and ``y``."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Tuple[int, int], Scalar] | None = None):
        clean: Dict[Tuple[int, int], Fraction] = {}
        for mono, c in (terms or {}).items():
            c = _frac(c)
            if c != 0:
                clean[(int(mono[0]), int(mono[1]))] = c
        self.terms: Dict[Tuple[int, int], Fraction] = clean

    @classmethod
    def x(cls) -> "BiPoly":
        return cls({(1, 0): 1})

    @classmethod
    def y(cls) -> "BiPoly":
        return cls({(0, 1): 1})

    @classmethod
    def const(cls, c: Scalar) -> "BiPoly":
        return cls({(0, 0): c})

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = BiPoly.const(other)
        if not isinstance(other, BiPoly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __repr__(self) -> str:
        if not self.terms:
            return "BiPoly(0)"
        body = " + ".join(f"{c}*x^{i}*y^{j}" for (i, j), c in sorted(self.terms.items()))
        return f"BiPoly({body})"

    def _coerce(self, other) -> "BiPoly":
        if isinstance(other, BiPoly):
            return other
        if isinstance(other, (int, Fraction)):
            return BiPoly.const(other)
        return NotImplemented

    def __add__(self, other) -> "BiPoly":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for mono, c in other.terms.items():
            out[mono] = out.get(mono, 0) + c
        return BiPoly(out)

    __radd__ = __add__

    def __neg__(self) -> "BiPoly":
        return BiPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "BiPoly":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "BiPoly":
        return (-self) + other

    def __mul__(self, other) -> "BiPoly":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: Dict[Tuple[int, int], Fraction] = {}
        for (i1, j1), a in self.terms.items():
            for (i2, j2), b in other.terms.items():
                key = (i1 + i2, j1 + j2)
                out[key] = out.get(key, 0) + a * b
        return BiPoly(out)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "BiPoly":
        if not isinstance(e, int) or e < 0:
            raise ValueError(f"exponent must be a nonnegative integer, got {e!r}")
        result = BiPoly.const(1)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __call__(self, x: Scalar, y: Scalar) -> Fraction:
        return sum((c * Fraction(x) ** i * Fraction(y) ** j for (i, j), c in self.terms.items()),
                   Fraction(0))

    def coefficient_in_y(self, j: int) -> UniPoly:
        """Coefficient of y**j, as a polynomial in x."""
        deg = max((i for (i, jj) in self.terms if jj == j), default=-1)
        cs = [Fraction(0)] * (deg + 1)
        for (i, jj), c in self.terms.items():
            if jj == j:
                cs[i] = c
        return UniPoly(cs)

    def degree_in_y(self) -> int:
        return max((j for (_, j) in self.terms), default=-1)

    def first_difference(self, other: "BiPoly"):
        """Smallest monomial whose coefficients differ, with both coefficients."""
        for mono in sorted(set(self.terms) | set(other.terms)):
            a = self.terms.get(mono, Fraction(0))
            b = other.terms.get(mono, Fraction(0))
            if a != b:
                return mono, a, b
        return None


def binomial_power(a: Scalar, b: Scalar, var: str, e: int) -> BiPoly:
    """(a + b*var)**e expanded directly by the binomial theorem."""
    a, b = _frac(a), _frac(b)
    out = {}
    for j in range(e + 1):
        mono = (j, 0) if var == "x" else (0, j)
        out[mono] = comb(e, j) * a ** (e - j) * b ** j
    return BiPoly(out)


def poly_arith(a, b, op: str, e: int | None = None):
    """Dispatch one of add/sub/mul/pow/compose on polynomials.

    ``pow`` ignores ``b`` and raises ``a`` to ``e``; ``compose`` returns
    ``a(b(x))`` and is defined for UniPoly only.
    """
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "pow":
        if e is None:
            raise ValueError("pow requires an exponent")
        return a ** e
    if op == "compose":
        if not (isinstance(a, UniPoly) and isinstance(b, UniPoly)):
            raise TypeError("compose is only defined for UniPoly")
        return a.compose(b)
    raise ValueError(f"unknown operation {op!r}")


def poly_derivative_eval(p: UniPoly, order: int, at: Scalar) -> Fraction:
    """Exact value of the ``order``-th derivative of ``p`` at ``at``."""
    if order < 0:
        raise ValueError("derivative order must be >= 0")
    if order > p.degree:
        return Fraction(0)
    return p.derivative(order)(at)


# -- Sturm sequences ---------------------------------------------------------

def square_free_part(p: UniPoly) -> UniPoly:
    if p.is_zero():
        raise ValueError("zero polynomial has no square-free part")
    g = poly_gcd(p, p.derivative())
    return p // g if g.degree > 0 else p


def sturm_chain(p: UniPoly) -> list[UniPoly]:
    """Sturm chain of the square-free part of ``p``."""
    q = square_free_part(p)
    chain = [q, q.derivative()]
    while not chain[-1].is_zero():
        chain.append(-(chain[-2] % chain[-1]))
    return chain[:-1]


def _sign(c: Fraction) -> int:
    return (c > 0) - (c < 0)


def sign_variations(chain: list[UniPoly], at: Scalar) -> int:
    signs = [s for s in (_sign(q(at)) for q in chain) if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def sturm_root_count(p: UniPoly, lo: Scalar, hi: Scalar, include_hi: bool = True,
                     include_lo: bool = False) -> int:
    """Number of distinct real roots of ``p`` in the interval from lo to hi.

    The interval is open at ``lo`` and closed at ``hi`` by default.  For a
    square-free chain, V(lo) - V(hi) counts roots in (lo, hi] even when an
    endpoint is itself a root, which the flags then adjust.
    """
    if p.is_zero():
        raise ValueError("sturm_root_count: zero polynomial")
    lo, hi = _frac(lo), _frac(hi)
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    chain = sturm_chain(p)
    count = sign_variations(chain, lo) - sign_variations(chain, hi)
    if not include_hi and p(hi) == 0:
        count -= 1
    if include_lo and p(lo) == 0:
        count += 1
    return count


def certify_nonnegative(p: UniPoly, lo: Scalar, hi: Scalar) -> dict:
    """Certificate that p >= 0 on (lo, hi].

    No root strictly inside the interval means p keeps one sign there; the
    sign is read off at the midpoint.  A zero exactly at either endpoint is
    accepted.
    """
    lo, hi = _frac(lo), _frac(hi)
    if p.is_zero():
        return {"interior_roots": 0, "at_lo": Fraction(0), "at_mid": Fraction(0),
                "at_hi": Fraction(0), "nonnegative": True}
    interior = sturm_root_count(p, lo, hi, include_hi=False)
    mid = (lo + hi) / 2
    cert = {
        "interior_roots": interior,
        "at_lo": p(lo),
        "at_mid": p(mid),
        "at_hi": p(hi),
    }
    cert["nonnegative"] = (interior == 0 and cert["at_mid"] > 0
                           and cert["at_lo"] >= 0 and cert["at_hi"] >= 0)
    return cert
