"""Exact checks of the combinatorial identities behind the E_k formula.

Every check builds both sides as exact polynomials and compares canonical
forms, so a pass is a proof for that order.  The four polynomial
identities are

  A1      sum_i (-1)^i C(k+1,i+1) sum_{p<=i} (1-x)^p (1-y)^(i-p) = sum_i x^(k-i) y^i
  A2      sum_i (-1)^i C(k+1,i+1) sum_{p<=i} (1+x)^p            = (-x)^k
  BLEMMA  sum_i (-1)^i C(k+1,i+1) B_i = -(n-k) x^(k+1) - (k+1) x^k,
          B_i = -(n-i)(1-(1-x)^(i+1)), with n kept symbolic
  X1      sum_{i<k} C(k+1,i) (r-w)^(k-i-1) w^i = sum_{i=1..k} i r^(k-i) w^(i-1)

The rest of the module certifies the sign statements about
P(x) = x^m + 2x^(m-1) + ... + (m+1) at x = -2/m that the lower bound for
E_k relies on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Optional

from .exactpoly import BiPoly, UniPoly, binomial_power, certify_nonnegative


class IdentityName(str, enum.Enum):
    A1 = "A1"
    A2 = "A2"
    BLEMMA = "BLEMMA"
    X1 = "X1"


@dataclass(frozen=True)
class IdentityResult:
    name: IdentityName
    k: int
    passed: bool
    # (monomial, lhs coefficient, rhs coefficient) for the first mismatch
    counterexample: Optional[tuple] = None


def _sides_a1(k: int) -> tuple[BiPoly, BiPoly]:
    one_minus_x = [binomial_power(1, -1, "x", p) for p in range(k + 1)]
    one_minus_y = BiPoly({(0, 0): 1, (0, 1): -1})
    lhs = BiPoly()
    inner = BiPoly()
    for i in range(k + 1):
        # inner_i = sum_{p<=i} (1-x)^p (1-y)^(i-p) = (1-y) inner_{i-1} + (1-x)^i
        inner = one_minus_y * inner + one_minus_x[i]
        lhs = lhs + (-1) ** i * comb(k + 1, i + 1) * inner
    rhs = BiPoly({(k - i, i): 1 for i in range(k + 1)})
    return lhs, rhs


def _sides_a2(k: int) -> tuple[BiPoly, BiPoly]:
    lhs = BiPoly()
    inner = BiPoly()
    for i in range(k + 1):
        inner = inner + binomial_power(1, 1, "x", i)
        lhs = lhs + (-1) ** i * comb(k + 1, i + 1) * inner
    rhs = BiPoly({(k, 0): (-1) ** k})
    return lhs, rhs


def _sides_blemma(k: int) -> tuple[BiPoly, BiPoly]:
    # second variable of the BiPoly plays the role of n
    x, n = BiPoly.x(), BiPoly.y()
    lhs = BiPoly()
    for i in range(k + 1):
        b_i = -(n - i) * (1 - binomial_power(1, -1, "x", i + 1))
        lhs = lhs + (-1) ** i * comb(k + 1, i + 1) * b_i
    rhs = -(n - k) * x ** (k + 1) - (k + 1) * x ** k
    return lhs, rhs


def _sides_x1(k: int) -> tuple[BiPoly, BiPoly]:
    r, w = BiPoly.x(), BiPoly.y()
    lhs = BiPoly()
    for i in range(k):
        lhs = lhs + comb(k + 1, i) * (r - w) ** (k - i - 1) * w ** i
    rhs = BiPoly({(k - i, i - 1): i for i in range(1, k + 1)})
    return lhs, rhs


_BUILDERS = {
    IdentityName.A1: _sides_a1,
    IdentityName.A2: _sides_a2,
    IdentityName.BLEMMA: _sides_blemma,
    IdentityName.X1: _sides_x1,
}


def identity_sides(name, k: int) -> tuple[BiPoly, BiPoly]:
    name = IdentityName(name)
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"{name.value} is stated for integer k >= 1, got {k!r}")
    return _BUILDERS[name](k)


def verify_identity(name, k: int) -> IdentityResult:
    """Expand both sides of ``name`` at order ``k`` and compare exactly."""
    name = IdentityName(name)
    lhs, rhs = identity_sides(name, k)
    if lhs == rhs:
        return IdentityResult(name, k, True)
    return IdentityResult(name, k, False, lhs.first_difference(rhs))


# -- the polynomial P and its derivatives at -2/m ---------------------------

def appendix_polynomial(m: int) -> UniPoly:
    """P(x) = x^m + 2 x^(m-1) + ... + m x + (m+1)."""
    return UniPoly([m + 1 - j for j in range(m + 1)])


def derivative_values(m: int) -> list[Fraction]:
    """[P^(i)(-2/m) for i = 0..m], computed in integer arithmetic.

    m^(m-i) * P^(i)(-2/m) = sum_j (m+1-j) * j!/(j-i)! * (-2)^(j-i) * m^(m-j)
    is an integer, so only one division per value is needed.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    pow_m = [m ** e for e in range(m + 1)]
    pow_2 = [(-2) ** e for e in range(m + 1)]
    # terms[j] holds (m+1-j) * j!/(j-i)! for the current i
    terms = [m + 1 - j for j in range(m + 1)]
    values = []
    for i in range(m + 1):
        num = sum(terms[j] * pow_2[j - i] * pow_m[m - j] for j in range(i, m + 1))
        values.append(Fraction(num, pow_m[m - i]))
        for j in range(i + 1, m + 1):
            terms[j] *= j - i
    return values


def _falling(p: int, i: int) -> int:
    """a(p, i) = (i+p)(i+p-1)...(p+1)."""
    out = 1
    for t in range(p + 1, p + i + 1):
        out *= t
    return out


def block_value(m: int, i: int, p: int, at: Fraction) -> Fraction:
    """A_p(at) = (m-i+1-2p) a(2p,i) at^(2p) + (m-i-2p) a(2p+1,i) at^(2p+1)."""
    return ((m - i + 1 - 2 * p) * _falling(2 * p, i) * at ** (2 * p)
            + (m - i - 2 * p) * _falling(2 * p + 1, i) * at ** (2 * p + 1))


def claim1_holds(m: int, i: int, p: int) -> bool:
    """Exact sign test of A_p(-2/m) > 0.

    Dividing A_p(-2/m) by the positive number a(2p,i) (2/m)^(2p) / m and using
    a(2p+1,i) / a(2p,i) = (i+2p+1)/(2p+1) leaves an integer comparison.
    """
    lhs = (m - i + 1 - 2 * p) * m * (2 * p + 1)
    rhs = 2 * (m - i - 2 * p) * (i + 2 * p + 1)
    return lhs > rhs


def claim5_check(m: int, values: list[Fraction]) -> dict:
    """The three cases i = m-4, m-3, m-2 (m >= 5), including the bound chain for m-4."""
    i = m - 4
    exact = 6 * values[i] / factorial(i)
    first = (30 - Fraction(48 * (m - 3), m) + Fraction(36 * (m - 2) * (m - 3), m ** 2)
             - Fraction(16 * (m - 1) * (m - 2) * (m - 3), m ** 3))
    second = 30 - Fraction(48 * (m - 3), m) + Fraction(20 * (m - 2) * (m - 3), m ** 2)
    closed = Fraction(2 * m * m + 44 * m + 120, m * m)
    chain_ok = exact >= first >= second and second == closed and closed > 0
    return {
        "i=m-4": chain_ok and values[m - 4] > 0,
        "i=m-3": values[m - 3] > 0,
        "i=m-2": values[m - 2] > 0,
    }


@dataclass
class AppendixReport:
    m: int
    values: list[Fraction]
    all_nonneg: bool
    penultimate_zero: bool
    claim1_pass: bool
    claim5_pass: Optional[bool]
    claim1_exceptions: list = field(default_factory=list)
    claim5_detail: dict = field(default_factory=dict)


def appendix_report(m: int) -> AppendixReport:
    values = derivative_values(m)
    exceptions = []
    for i in range(0, m - 1):
        for p in range(1, (m - i - 1) // 2 + 1):
            if not claim1_holds(m, i, p):
                exceptions.append((i, p))
    if m >= 5:
        detail = claim5_check(m, values)
        claim5 = all(detail.values())
    else:
        detail, claim5 = {}, None
    return AppendixReport(
        m=m,
        values=values,
        all_nonneg=all(v >= 0 for v in values),
        penultimate_zero=values[m - 1] == 0,
        claim1_pass=not exceptions,
        claim5_pass=claim5,
        claim1_exceptions=exceptions,
        claim5_detail=detail,
    )


# -- Claim 3 ------------------------------------------------------------------

def claim3_product_form() -> BiPoly:
    """A/(8m) as a polynomial in (y, eps), expanded from its product form."""
    y, e = BiPoly.x(), BiPoly.y()
    return (6 * (1 - y + 2 * e) * (y - e) * (y - 2 * e) * (y - 3 * e) * (y - 4 * e)
            - 20 * (1 - y + 3 * e) * (y - 2 * e) * (y - 3 * e) * (y - 4 * e)
            + 30 * (1 - y + 4 * e) * (y - 3 * e) * (y - 4 * e)
            - 30 * (1 - y + 5 * e) * (y - 4 * e)
            + 15 * (1 - y + 6 * e))


CLAIM3_DISPLAYED = {
    5: [288],
    4: [1584, -744],
    3: [1920, -2340, 720],
    2: [960, -1720, 1270, -330],
    1: [210, -480, 510, -300, 72],
    0: [15, -45, 60, -50, 26, -6],
}


def claim3_displayed() -> BiPoly:
    return BiPoly({(i, j): c for j, cs in CLAIM3_DISPLAYED.items() for i, c in enumerate(cs)})


def claim3_A(m: int, i: int) -> Fraction:
    """A as defined from (m, i) before the change of variables."""
    m_ = Fraction(m)
    return (Fraction(48) / m_ ** 4 * (m - i - 3) * (i + 4) * (i + 3) * (i + 2) * (i + 1)
            - Fraction(160) / m_ ** 3 * (m - i - 2) * (i + 3) * (i + 2) * (i + 1)
            + Fraction(240) / m_ ** 2 * (m - i - 1) * (i + 2) * (i + 1)
            - Fraction(240) / m_ * (m - i) * (i + 1)
            + 120 * (m - i + 1))


def claim3_verify(link_max_m: int = 40) -> dict:
    """Re-expand A/(8m), match it to the displayed polynomial, and certify signs.

    Also spot-checks, for 11 <= m <= link_max_m and m/2 < i <= m-5, that
    A(m, i) = 8m * Q((i+5)/m, 1/m) and that (A_0+A_1+A_2)(-2/m) > 0.
    """
    expanded = claim3_product_form()
    displayed = claim3_displayed()
    certificates = {}
    for j in range(6):
        coeff = expanded.coefficient_in_y(j)
        certificates[j] = certify_nonnegative(coeff, Fraction(1, 2), 1)
        certificates[j]["poly"] = coeff
    link_ok = True
    blocks_ok = True
    for m in range(11, link_max_m + 1):
        for i in range(m // 2 + 1, m - 4):
            y, eps = Fraction(i + 5, m), Fraction(1, m)
            link_ok &= claim3_A(m, i) == 8 * m * expanded(y, eps)
            at = Fraction(-2, m)
            blocks_ok &= sum(block_value(m, i, p, at) for p in range(3)) > 0
    expansion_match = expanded == displayed
    return {
        "expansion_match": expansion_match,
        "mismatch": None if expansion_match else expanded.first_difference(displayed),
        "certificates": certificates,
        "link_ok": link_ok,
        "blocks_ok": blocks_ok,
        "passed": expansion_match and link_ok and blocks_ok
        and all(c["nonnegative"] for c in certificates.values()),
    }


# -- Theorem 2 coefficients -------------------------------------------------

def lower_bound_polynomial(k: int) -> UniPoly:
    """sum_{i=1..k} i x^(k-i); equals the appendix P with m = k-1."""
    return UniPoly([k - j for j in range(k)])


def theorem2_coefficients(k: int) -> list[Fraction]:
    """[a_2, ..., a_k] with a_i = P^(k-i)(-2/(k-1)) / (k-i)!.

    Raises ArithmeticError if any a_i is negative.
    """
    if k < 2:
        raise ValueError("the Ricci bound -2/(k-1) needs k >= 2")
    P = lower_bound_polynomial(k)
    at = Fraction(-2, k - 1)
    coeffs = [P.derivative(k - i)(at) / factorial(k - i) for i in range(2, k + 1)]
    bad = [(i, a) for i, a in zip(range(2, k + 1), coeffs) if a < 0]
    if bad:
        raise ArithmeticError(f"negative coefficients for k={k}: {bad}")
    return coeffs


def theorem2_reconstruction(k: int) -> bool:
    """P(x) == (x+c)^(k-1) + sum_{i>=2} a_i (x+c)^(k-i) with c = 2/(k-1)."""
    shift = UniPoly([Fraction(2, k - 1), 1])
    rebuilt = shift ** (k - 1)
    for i, a in zip(range(2, k + 1), theorem2_coefficients(k)):
        rebuilt = rebuilt + a * shift ** (k - i)
    return rebuilt == lower_bound_polynomial(k)


# -- the remark on A_0 + A_1 -------------------------------------------------

def remark_value(m: int, i: int) -> Fraction:
    """(6/i!) (A_0 + A_1)(-2/m)."""
    at = Fraction(-2, m)
    return 6 * (block_value(m, i, 0, at) + block_value(m, i, 1, at)) / factorial(i)


def remark_asymptotic(ms=(10, 100, 1000)) -> dict:
    """Limit of (6/i!)(A_0+A_1)(-2/m) / m for i = 9m/10, plus finite-m values."""
    limit_poly = UniPoly([1, -1]) * UniPoly([6, -12, 12, -8])
    exact_limit = limit_poly(Fraction(9, 10))
    finite = []
    for m in ms:
        if m % 10:
            raise ValueError("m must be divisible by 10")
        val = remark_value(m, 9 * m // 10)
        finite.append({"m": m, "value": val, "per_m": val / m})
    return {"exact_limit": exact_limit, "finite_m_values": finite}
