import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toric_energies.jets import Jet, hessian_jets, jet_det, multi_indices

coord = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


def test_multi_index_count():
    for n in (1, 2, 3):
        for order in range(5):
            assert len(multi_indices(n, order)) == math.comb(n + order, n)


@settings(max_examples=40, deadline=None)
@given(coord, coord)
def test_exp_log_derivatives_two_variables(a, b):
    x = np.array([[a, b]])
    X, Y = Jet.variables(x, 4)
    f = (X * Y).exp()
    # d^4/dx^2 dy^2 of exp(xy) = e^{xy}(4 + 16xy + 4x^2y^2)... compare against a closed form
    e = math.exp(a * b)
    assert float(f.partial((1, 0))[0]) == pytest.approx(b * e, rel=1e-14)
    assert float(f.partial((1, 1))[0]) == pytest.approx((1 + a * b) * e, rel=1e-14)
    assert float(f.partial((2, 2))[0]) == pytest.approx((2 + 4 * a * b + a * a * b * b) * e, rel=1e-13)
    g = (X.exp() + Y.exp()).log()
    s = math.exp(a) + math.exp(b)
    assert float(g.partial((1, 1))[0]) == pytest.approx(-math.exp(a + b) / s ** 2, rel=1e-13)


def test_log_rejects_nonpositive():
    (X,) = Jet.variables(np.array([[-1.0]]), 2)
    with pytest.raises(FloatingPointError):
        X.log()


def test_jet_det_matches_numpy():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(5, 2))
    X, Y = Jet.variables(x, 4)
    phi = (X.exp() + Y.exp() + (X + Y).exp() * 0.5 + 1.0).log() * 3.0
    det = jet_det(hessian_jets(phi))
    H = np.asarray(phi.hessian(), dtype=float)
    assert np.allclose(np.asarray(det.value, dtype=float), np.linalg.det(H), rtol=1e-13)


def test_derivative_lowers_order():
    X, Y = Jet.variables(np.array([[0.3, -0.2]]), 3)
    f = X * X * Y
    d = f.derivative(0)
    assert d.order == 2
    assert float(d.value[0]) == pytest.approx(2 * 0.3 * -0.2)
    assert float(d.partial((0, 1))[0]) == pytest.approx(2 * 0.3)
