from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from toric_energies.exactpoly import (BiPoly, UniPoly, binomial_power, certify_nonnegative,
                                      poly_arith, poly_derivative_eval, sturm_root_count)

small = st.fractions(min_value=-5, max_value=5, max_denominator=7)
polys = st.lists(small, min_size=0, max_size=9).map(UniPoly)


def test_square_of_one_minus_x():
    x = UniPoly.x()
    assert (1 - x) ** 2 == UniPoly([1, -2, 1])


def test_zero_annihilates_bipoly():
    p = BiPoly.x() + BiPoly.y()
    prod = poly_arith(p, BiPoly.const(0), "mul")
    assert prod.is_zero() and prod.terms == {}


def test_cube_coefficient():
    assert ((1 - UniPoly.x()) ** 3).coeffs[1] == -3


def test_pow_rejects_negative_exponent():
    with pytest.raises(ValueError):
        poly_arith(UniPoly.x(), None, "pow", -1)


def test_compose_univariate_only():
    x = UniPoly.x()
    assert poly_arith(x ** 2, x + 1, "compose") == UniPoly([1, 2, 1])
    with pytest.raises(TypeError):
        poly_arith(BiPoly.x(), BiPoly.y(), "compose")


def test_canonical_form_drops_zeros():
    assert UniPoly([1, 2, 0, 0]).degree == 1
    assert UniPoly([0, 0]).is_zero()
    assert BiPoly({(1, 0): 0, (0, 1): 2}).terms == {(0, 1): Fraction(2)}


def test_derivative_values_at_minus_one():
    p = UniPoly([3, 2, 1])
    assert poly_derivative_eval(p, 1, -1) == 0
    assert poly_derivative_eval(p, 0, -1) == 2
    assert poly_derivative_eval(p, 3, Fraction(1, 3)) == 0


def test_binomial_power_matches_repeated_product():
    assert binomial_power(1, -1, "x", 4) == (1 - BiPoly.x()) ** 4
    assert binomial_power(2, 1, "y", 3) == (2 + BiPoly.y()) ** 3


def test_sturm_examples():
    y = UniPoly.x()
    half = Fraction(1, 2)
    assert sturm_root_count(y ** 2 - 1, half, 1, include_hi=True) == 1
    assert sturm_root_count(y ** 2 - 1, half, 1, include_hi=False) == 0
    assert sturm_root_count(y ** 2 + 1, half, 1) == 0
    lin = UniPoly([1584, -744])
    assert sturm_root_count(lin, half, 1) == 0 and lin(half) > 0


def test_sturm_rejects_zero_and_empty_interval():
    with pytest.raises(ValueError):
        sturm_root_count(UniPoly(), 0, 1)
    with pytest.raises(ValueError):
        sturm_root_count(UniPoly.x(), 1, 0)


def test_sturm_handles_repeated_roots():
    x = UniPoly.x()
    p = (x - Fraction(1, 3)) ** 3 * (x - Fraction(2, 3)) ** 2
    assert sturm_root_count(p, 0, 1) == 2


def test_certificate_accepts_endpoint_root():
    y = UniPoly.x()
    assert certify_nonnegative(1 - y, Fraction(1, 2), 1)["nonnegative"]
    assert not certify_nonnegative(y - Fraction(3, 4), Fraction(1, 2), 1)["nonnegative"]


@settings(max_examples=60, deadline=None)
@given(polys, polys)
def test_derivative_is_a_derivation(p, q):
    assert (p + q).derivative() == p.derivative() + q.derivative()
    assert (p * q).derivative() == p.derivative() * q + p * q.derivative()


@settings(max_examples=60, deadline=None)
@given(polys, polys)
def test_equality_is_zero_difference(p, q):
    assert (p - q).is_zero() == (p == q)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-900, 900), min_size=1, max_size=5, unique=True))
def test_sturm_matches_sign_scan(roots):
    # roots are k/1000 with distinct k, hence at least 1e-3 apart
    x = UniPoly.x()
    p = UniPoly([1])
    for r in roots:
        p = p * (x - Fraction(r, 1000))
    lo, hi = Fraction(-1), Fraction(1)
    samples = [lo + (hi - lo) * Fraction(i, 10000) for i in range(10001)]
    values = [p(s) for s in samples]
    scan = sum(1 for a, b in zip(values, values[1:]) if a != 0 and (b == 0 or (a > 0) != (b > 0)))
    assert sturm_root_count(p, lo, hi) == scan == len(roots)
