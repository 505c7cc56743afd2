"""
Tests for truncated Taylor jets
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from config import JET_MAX_ORDER
from errors import JetOrderError
from jets import Jet, directional, minkowski_dot, monomial_basis

ORIGIN = (0.0, 0.0, 0.0, 0.0)
coordinate = st.floats(min_value=-2, max_value=2, allow_nan=False, allow_infinity=False)


# ============================================================================
# BASIS
# ============================================================================

def test_basis_sizes_and_prefix_property():
    for order in range(5):
        assert monomial_basis(order).size == math.comb(order + 4, 4)
    low, high = monomial_basis(2), monomial_basis(4)
    np.testing.assert_array_equal(high.exponents[:low.size], low.exponents)


def test_basis_order_out_of_range():
    with pytest.raises(JetOrderError):
        monomial_basis(JET_MAX_ORDER + 1)
    with pytest.raises(JetOrderError):
        monomial_basis(-1)


def test_coefficient_count_is_checked():
    with pytest.raises(ValueError):
        Jet(np.zeros(3), 1)


# ============================================================================
# ARITHMETIC AND CALCULUS
# ============================================================================

def test_product_of_coordinates():
    X = Jet.coordinates((0.0, 1.0, 2.0, 0.0), 3)
    f = X[1] * X[1] * X[2]
    assert f.value == pytest.approx(2.0)
    assert f.derivative((0, 1, 0, 0)) == pytest.approx(4.0)
    assert f.derivative((0, 2, 0, 0)) == pytest.approx(4.0)
    assert f.derivative((0, 2, 1, 0)) == pytest.approx(2.0)
    assert f.derivative((0, 0, 2, 0)) == pytest.approx(0.0)
    np.testing.assert_allclose(f.partial(1).value, 4.0)


def test_reciprocal_of_one_plus_x():
    x = Jet.variable(1, ORIGIN, 5)
    inv = (1 + x).reciprocal()
    for k in range(6):
        assert inv.coefficient((0, k, 0, 0)) == pytest.approx((-1.0) ** k)


def test_sqrt_exp_and_sin_coefficients():
    x = Jet.variable(3, ORIGIN, 4)
    root = (x + 4).sqrt()
    assert root.value == pytest.approx(2.0)
    assert root.coefficient((0, 0, 0, 1)) == pytest.approx(0.25)
    assert root.coefficient((0, 0, 0, 2)) == pytest.approx(-1 / 64)
    ex = x.exp()
    for k in range(5):
        assert ex.coefficient((0, 0, 0, k)) == pytest.approx(1 / math.factorial(k))
    assert x.sin().coefficient((0, 0, 0, 3)) == pytest.approx(-1 / 6)
    assert x.cos().coefficient((0, 0, 0, 2)) == pytest.approx(-0.5)


def test_sqrt_of_nonpositive_value_raises():
    with pytest.raises(ValueError):
        Jet.variable(0, ORIGIN, 2).sqrt()


def test_reciprocal_of_zero_raises():
    with pytest.raises(ZeroDivisionError):
        Jet.variable(0, ORIGIN, 2).reciprocal()


@settings(max_examples=50, deadline=None)
@given(coordinate, coordinate)
def test_double_angle_identity(a, b):
    X = Jet.coordinates((0.0, a, b, 0.0), 4)
    theta = X[1] * 0.7 - X[2] * 1.3
    lhs = theta.sin() * theta.cos() * 2
    rhs = (theta * 2).sin()
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-10)


def test_partial_then_antiderivative_round_trip():
    X = Jet.coordinates((0.0, 0.0, 0.0, 0.0), 3)
    f = X[0] * X[1] + X[0] ** 2 * 3.0
    back = f.partial(0).antiderivative(0)
    np.testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-14)


def test_antiderivative_vanishes_on_the_center_plane():
    one = Jet.constant(1.0, 2, ORIGIN)
    prim = one.antiderivative(2)
    assert prim.order == 3
    assert prim.value == 0.0
    assert prim.coefficient((0, 0, 1, 0)) == 1.0


def test_order_exhaustion():
    with pytest.raises(JetOrderError):
        Jet.constant(1.0, 0).partial(0)
    with pytest.raises(JetOrderError):
        Jet.constant(1.0, JET_MAX_ORDER).antiderivative(0)
    with pytest.raises(JetOrderError):
        Jet.constant(1.0, 2).truncate(3)
    with pytest.raises(JetOrderError):
        Jet.variable(0, ORIGIN, 1).derivative((2, 0, 0, 0))


def test_mismatched_centers_raise():
    a = Jet.variable(0, ORIGIN, 2)
    b = Jet.variable(0, (1.0, 0.0, 0.0, 0.0), 2)
    with pytest.raises(ValueError):
        a + b


def test_mixed_orders_truncate_to_the_lower():
    a = Jet.variable(0, ORIGIN, 4)
    b = Jet.variable(1, ORIGIN, 2)
    assert (a * b).order == 2
    assert (a + b).order == 2


def test_time_truncation_and_spatial_part():
    X = Jet.coordinates(ORIGIN, 3)
    f = X[0] * X[0] + X[1] + X[0] * X[2]
    np.testing.assert_allclose(f.spatial_part().coeffs, X[1].coeffs)
    kept = f.time_truncated(1)
    assert kept.coefficient((2, 0, 0, 0)) == 0.0
    assert kept.coefficient((1, 0, 1, 0)) == 1.0


# ============================================================================
# VECTOR JETS
# ============================================================================

def test_vector_jets_and_contractions():
    X = Jet.coordinates((0.0, 1.0, 2.0, 3.0), 2)
    assert X.shape == (4,)
    assert minkowski_dot(X, X).value == pytest.approx(-14.0)
    # X.d(x.x / 2) = x.x for the Euclidean spatial square
    half_square = (X[1] * X[1] + X[2] * X[2] + X[3] * X[3]) * 0.5
    assert directional(X, half_square, spatial_only=True).value == pytest.approx(14.0)
    M = np.arange(16.0).reshape(4, 4)
    np.testing.assert_allclose(X.matvec(M).value, M @ X.value)
    assert X.quadratic_form(np.eye(4)).value == pytest.approx(14.0)
