import time
from fractions import Fraction
from math import factorial

import pytest

from toric_energies import identities as ids
from toric_energies.exactpoly import BiPoly, UniPoly, poly_derivative_eval


@pytest.mark.parametrize("name", list(ids.IdentityName))
def test_identities_small_orders(name):
    for k in range(1, 8):
        assert ids.verify_identity(name, k).passed


def test_a1_first_order_by_hand():
    lhs, rhs = ids.identity_sides("A1", 1)
    x, y = BiPoly.x(), BiPoly.y()
    assert lhs == 2 - (1 - x) - (1 - y) == rhs == x + y


def test_a2_second_order_by_hand():
    lhs, _ = ids.identity_sides("A2", 2)
    x = BiPoly.x()
    assert lhs == 3 - 3 * (2 + x) + (3 + 3 * x + x ** 2) == x ** 2


def test_blemma_first_order_by_hand():
    lhs, rhs = ids.identity_sides("BLEMMA", 1)
    x, n = BiPoly.x(), BiPoly.y()
    assert lhs == -2 * n * x + (n - 1) * (2 * x - x ** 2)
    assert rhs == -(n - 1) * x ** 2 - 2 * x


def test_x1_low_orders():
    lhs, rhs = ids.identity_sides("X1", 2)
    r, w = BiPoly.x(), BiPoly.y()
    assert lhs == (r - w) + 3 * w == r + 2 * w == rhs
    lhs, rhs = ids.identity_sides("X1", 1)
    assert lhs == rhs == BiPoly.const(1)


def test_order_zero_rejected():
    for name in ids.IdentityName:
        with pytest.raises(ValueError):
            ids.verify_identity(name, 0)


def test_broken_identity_reports_counterexample():
    lhs, rhs = ids.identity_sides("A2", 3)
    term = (lhs + BiPoly.x()).first_difference(rhs)
    assert term is not None and term[0] == (1, 0)


def test_appendix_small_m():
    r2 = ids.appendix_report(2)
    assert r2.values == [2, 0, 2] and r2.all_nonneg and r2.penultimate_zero
    r1 = ids.appendix_report(1)
    assert r1.values == [0, 1] and r1.all_nonneg
    assert r1.claim5_pass is None


@pytest.mark.parametrize("m", [1, 2, 3, 7, 12, 31])
def test_derivative_values_match_generic_evaluation(m):
    P = ids.appendix_polynomial(m)
    at = Fraction(-2, m)
    assert ids.derivative_values(m) == [poly_derivative_eval(P, i, at) for i in range(m + 1)]


@pytest.mark.parametrize("m", [4, 9, 15])
def test_blocks_sum_to_derivative(m):
    at = Fraction(-2, m)
    values = ids.derivative_values(m)
    for i in range(m + 1):
        total = sum(ids.block_value(m, i, p, at) for p in range((m - i) // 2 + 1))
        assert total == values[i]


@pytest.mark.parametrize("m", [11, 20, 37])
def test_claim1_integer_test_matches_block_sign(m):
    at = Fraction(-2, m)
    for i in range(0, m - 1):
        for p in range(1, (m - i - 1) // 2 + 1):
            assert ids.claim1_holds(m, i, p) == (ids.block_value(m, i, p, at) > 0)


def test_claim3():
    res = ids.claim3_verify(link_max_m=30)
    assert res["expansion_match"] and res["link_ok"] and res["blocks_ok"]
    assert all(c["nonnegative"] for c in res["certificates"].values())
    const = res["certificates"][0]["poly"]
    assert const == UniPoly([15, -45, 60, -50, 26, -6]) and const(1) == 0
    assert res["certificates"][4]["poly"](1) == 840


def test_claim3_detects_a_wrong_display():
    expanded = ids.claim3_product_form()
    wrong = ids.claim3_displayed() + BiPoly({(1, 4): 1})
    assert expanded != wrong


def test_theorem2_coefficients_small():
    assert ids.theorem2_coefficients(2) == [0]
    assert ids.theorem2_coefficients(3) == [0, 2]
    assert all(a >= 0 for a in ids.theorem2_coefficients(11))
    with pytest.raises(ValueError):
        ids.theorem2_coefficients(1)


def test_theorem2_reconstruction_sweep():
    for k in range(2, 41):
        assert ids.theorem2_reconstruction(k)
        assert all(a >= 0 for a in ids.theorem2_coefficients(k))


def test_remark_limit_and_finite_values():
    res = ids.remark_asymptotic()
    assert res["exact_limit"] == Fraction(-57, 625)
    assert float(res["exact_limit"]) == pytest.approx(-0.0912, abs=1e-12)
    finite = {d["m"]: d["value"] for d in res["finite_m_values"]}
    # at m = 10 the block sum is still positive; the negative sign appears for large m
    assert finite[10] == Fraction(264, 25)
    assert finite[100] < 0 and finite[1000] < 0
    assert abs(float(finite[1000]) / 1000 - float(res["exact_limit"])) < 0.01


def test_remark_value_direct():
    m, i = 10, 9
    at = Fraction(-2, m)
    a0 = (m - i + 1) * factorial(i) + (m - i) * factorial(i + 1) * at
    a1 = (m - i - 1) * (factorial(i + 2) // 2) * at ** 2 + (m - i - 2) * (factorial(i + 3) // 6) * at ** 3
    assert ids.remark_value(m, i) == 6 * (a0 + a1) / factorial(i)


def test_remark_rejects_m_not_divisible_by_ten():
    with pytest.raises(ValueError):
        ids.remark_asymptotic((15,))


def test_full_identity_sweep_is_fast():
    start = time.perf_counter()
    for name in ids.IdentityName:
        for k in range(1, 41):
            assert ids.verify_identity(name, k).passed
    assert time.perf_counter() - start < 30
