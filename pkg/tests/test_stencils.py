import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtgrowth.stencils import derivative, fd_weights


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_weights_annihilate_lower_powers(order):
    offs = tuple(range(-3, 4))
    w = fd_weights(order, offs)
    for p in range(len(offs)):
        exact = np.prod(np.arange(1, order + 1)) if p == order else 0.0
        assert w @ np.asarray(offs, float) ** p == pytest.approx(exact, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_low_degree_polynomials_are_exact(order, coeffs):
    x = np.linspace(-1, 1, 41)
    deg = order + 1
    c = np.asarray(coeffs[:deg + 1])
    poly = np.polynomial.Polynomial(c)
    got = derivative(poly(x), x[1] - x[0], order)
    want = poly.deriv(order)(x)
    assert np.max(np.abs(got - want)) < 1e-6 * max(1.0, np.max(np.abs(c)))


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_second_order_convergence(order):
    errs = []
    for n in (101, 201, 401):
        x = np.linspace(0, 2, n)
        d = derivative(np.sin(x), x[1] - x[0], order)
        exact = [np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t), np.sin][order - 1](x)
        errs.append(np.max(np.abs(d - exact)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((rates > 1.8) & (rates < 2.3))


def test_too_short_rejected():
    with pytest.raises(ValueError):
        derivative(np.ones(4), 0.1, 3)
