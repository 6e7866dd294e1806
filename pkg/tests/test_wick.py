"""Hermite recursion, binomial identity, Wick polynomial plumbing."""

import numpy as np
import pytest

from asqe.errors import ValidationError
from asqe.grid import Field, TorusGrid
from asqe.wick import (
    WickPolynomial,
    coefficient_tuple,
    eval_F_diamond,
    eval_f_diamond,
    hermite,
    hermite_binomial,
    wick_power,
)


def test_hermite_known_values():
    assert hermite(0, 3.7) == 1.0
    assert hermite(1, 3.7) == 3.7
    assert hermite(2, 2.0, 1.0) == 3.0          # x^2 - 1
    assert hermite(3, 1.0, 1.0) == -2.0         # x^3 - 3x
    assert hermite(4, 2.0, 1.0) == -5.0         # x^4 - 6x^2 + 3
    assert hermite(3, 1.0, 2.0) == -5.0         # x^3 - 3vx


def test_hermite_zero_variance_is_monomial():
    x = np.array([-1.0, 0.5, 1.5])
    for k in range(7):
        np.testing.assert_allclose(hermite(k, x, 0.0), x ** k, rtol=1e-14)
    assert hermite(4, 1.5, 0.0) == 1.5 ** 4


def test_hermite_variance_scaling():
    # H_k(x, v) = v^{k/2} H_k(x / sqrt(v), 1)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(50)
    for k in range(1, 9):
        for v in (0.3, 1.0, 2.7):
            lhs = hermite(k, x, v)
            rhs = v ** (k / 2) * hermite(k, x / np.sqrt(v), 1.0)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-11, atol=1e-11)


def test_hermite_order_bounds():
    with pytest.raises(ValidationError):
        hermite(-1, 0.0)
    with pytest.raises(ValidationError):
        hermite(17, 0.0)


def test_hermite_gaussian_moments():
    # E H_k(g) = 0 for k >= 1, E H_2(g)^2 = 2
    g = np.random.default_rng(21).standard_normal(200_000)
    for k in (1, 2, 3, 4):
        assert abs(np.mean(hermite(k, g, 1.0))) < 0.05 * max(1.0, k)
    assert abs(np.mean(hermite(2, g, 1.0) ** 2) - 2.0) < 0.05


def test_hermite_binomial_identity():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(30)
    y = rng.standard_normal(30)
    for k in range(7):
        lhs = hermite(k, x + y, 1.0)
        rhs = hermite_binomial(k, x, y)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)
    assert hermite_binomial(2, 1.0, 1.0) == 3.0
    assert hermite_binomial(0, 5.0, -3.0) == 1.0


def test_wick_power_matches_hermite():
    x = np.linspace(-2, 2, 9)
    np.testing.assert_array_equal(wick_power(x, 3, 1.0), hermite(3, x, 1.0))
    np.testing.assert_array_equal(wick_power(x, 1, 1.0), x)
    assert np.all(wick_power(x, 0, 1.0) == 1.0)


def test_wick_power_field_round_trip():
    g = TorusGrid(8)
    f = Field.from_function(g, lambda x1, x2: np.cos(x1))
    out = wick_power(f, 2, 1.0)
    assert isinstance(out, Field)
    np.testing.assert_allclose(out.values, f.values ** 2 - 1.0, atol=1e-14)
    var = Field.zeros(TorusGrid(16))
    with pytest.raises(ValidationError):
        wick_power(f, 2, var)  # mismatched grids


def test_polynomial_validation():
    WickPolynomial((0.0, 0.0, 0.25))  # quadratic, fine
    WickPolynomial((0.0, 0.3, 0.0, 0.0, 0.25))
    with pytest.raises(ValidationError):
        WickPolynomial((0.0, 1.0))  # degree 1
    with pytest.raises(ValidationError):
        WickPolynomial((0.0, 0.0, 0.0, 1.0))  # odd degree
    with pytest.raises(ValidationError):
        WickPolynomial((0.0, 0.0, 0.0, 0.0, -0.25))  # wrong sign
    with pytest.raises(ValidationError):
        WickPolynomial((0.0,) * 18 + (1.0,))  # degree 18


def test_derivative_coefficients():
    poly = WickPolynomial((0.0, 0.0, 0.0, 0.0, 0.25))
    assert poly.degree == 4
    assert poly.derivative_coeffs() == (0.0, 0.0, 0.0, 1.0)
    poly2 = WickPolynomial((1.0, -2.0, 0.5, 0.0, 0.0, 0.0, 3.0))
    assert poly2.derivative_coeffs() == (-2.0, 1.0, 0.0, 0.0, 0.0, 18.0)


def test_coefficient_tuple_degenerate_forms():
    assert coefficient_tuple(None) == (0.0,)
    assert coefficient_tuple((2.5,)) == (2.5,)
    assert coefficient_tuple([]) == (0.0,)
    poly = WickPolynomial((0.0, 0.0, 1.0))
    assert coefficient_tuple(poly) == (0.0, 0.0, 1.0)
    with pytest.raises(ValidationError):
        coefficient_tuple((np.nan,))


def test_quartic_diamond_closed_form():
    poly = WickPolynomial((0.0, 0.0, 0.0, 0.0, 0.25))
    rng = np.random.default_rng(8)
    u = rng.standard_normal((6, 6))
    var = 0.5 + rng.random((6, 6))
    expected_F = 0.25 * (u ** 4 - 6 * var * u ** 2 + 3 * var ** 2)
    np.testing.assert_allclose(eval_F_diamond(poly, u, var), expected_F, rtol=1e-12)
    expected_f = u ** 3 - 3 * var * u
    np.testing.assert_allclose(eval_f_diamond(poly, u, var), expected_f, rtol=1e-12)
    assert eval_f_diamond(poly, 1.0, 1.0) == -2.0


def test_diamond_simple_cases():
    # quadratic H_2 at constant field 2, unit variance
    poly = WickPolynomial((0.0, 0.0, 1.0))
    assert eval_F_diamond(poly, 2.0, 1.0) == 3.0
    # constant-only stub and zero potential
    assert eval_F_diamond((1.5,), 2.0, 1.0) == 1.5
    assert eval_F_diamond(None, 2.0, 1.0) == 0.0
    assert eval_f_diamond(None, 2.0, 1.0) == 0.0
    # zero variance degenerates to a plain polynomial
    poly4 = WickPolynomial((0.0, 0.0, 0.0, 0.0, 0.25))
    assert eval_f_diamond(poly4, 2.0, 0.0) == 8.0


def test_diamond_derivative_consistency():
    poly = WickPolynomial((0.3, -1.0, 0.2, 0.1, 0.0, 0.0, 0.05))
    u = np.linspace(-1.5, 1.5, 11)
    var = 0.8
    h = 1e-4
    fd = (eval_F_diamond(poly, u + h, var) - eval_F_diamond(poly, u - h, var)) / (2 * h)
    np.testing.assert_allclose(eval_f_diamond(poly, u, var), fd, atol=1e-6)
