"""Grid, transform, multiplier and norm tests with closed-form references."""

from math import pi

import numpy as np
import pytest

from asqe.errors import ValidationError
from asqe.grid import (
    Field,
    TorusGrid,
    apply_multiplier,
    besov_norm,
    chi_symbol,
    dyadic_blocks,
    dyadic_symbol,
    fractional_symbol,
    from_fourier,
    heat_symbol,
    identity_symbol,
    integrate,
    lp_norm,
    pad_coefficients,
    psi_symbol,
    to_fourier,
    torus_distance,
    truncate_coefficients,
)


def test_grid_rejects_bad_sizes():
    for n in (0, 4, 7, 12, 48, -16):
        with pytest.raises(ValidationError):
            TorusGrid(n)


def test_grid_geometry():
    g = TorusGrid(16)
    assert g.spacing == 2 * pi / 16
    assert abs(g.cell_area * 16 ** 2 - (2 * pi) ** 2) < 1e-14
    assert g.laplacian_symbol[0, 0] == 0.0
    assert g.laplacian_symbol[1, 0] == 1.0
    assert g.laplacian_symbol[-1, 2] == 5.0
    assert g.laplacian_symbol.max() == 2 * 8 ** 2


def test_fourier_round_trip():
    g = TorusGrid(32)
    rng = np.random.default_rng(7)
    f = Field(g, rng.standard_normal((32, 32)))
    back = from_fourier(g, to_fourier(f))
    assert np.max(np.abs(back.values - f.values)) < 1e-10


def test_fourier_point_values():
    g = TorusGrid(16)
    f = Field.from_function(g, lambda x1, x2: 2.0 + np.cos(x1) - 3.0 * np.sin(2 * x2))
    c = to_fourier(f)
    assert abs(c[0, 0] - 2.0) < 1e-12
    assert abs(c[1, 0] - 0.5) < 1e-12
    assert abs(c[-1, 0] - 0.5) < 1e-12
    # sin(2 x2) = (e^{2i x2} - e^{-2i x2}) / 2i
    assert abs(c[0, 2] - (-3.0 / (2j))) < 1e-12


def test_parseval():
    g = TorusGrid(32)
    rng = np.random.default_rng(11)
    f = Field(g, rng.standard_normal((32, 32)))
    lhs = (2 * pi) ** 2 * np.sum(np.abs(to_fourier(f)) ** 2)
    rhs = integrate(Field(g, f.values ** 2))
    assert abs(lhs - rhs) < 1e-10 * abs(rhs)


def test_integrate_cosine_squared():
    g = TorusGrid(16)
    f = Field.from_function(g, lambda x1, x2: np.cos(x1) ** 2)
    assert abs(integrate(f) - 2 * pi ** 2) < 1e-12


def test_identity_multiplier_is_bit_exact():
    g = TorusGrid(16)
    rng = np.random.default_rng(3)
    f = Field(g, rng.standard_normal((16, 16)))
    out = apply_multiplier(f, identity_symbol())
    assert np.array_equal(out.values, f.values)


def test_psi_regularization_of_single_mode():
    # P_N cos(3 x1) = exp(-(9/N^2)^2) cos(3 x1)
    g = TorusGrid(32)
    f = Field.from_function(g, lambda x1, x2: np.cos(3 * x1))
    out = apply_multiplier(f, psi_symbol(), scale=4.0)
    expected = np.exp(-(9.0 / 16.0) ** 2) * f.values
    assert np.max(np.abs(out.values - expected)) < 1e-12


def test_heat_multiplier_single_mode():
    g = TorusGrid(16)
    f = Field.from_function(g, lambda x1, x2: np.cos(x1))
    t = 0.37
    out = apply_multiplier(f, heat_symbol(), scale=t)
    assert np.max(np.abs(out.values - np.exp(-t) * f.values)) < 1e-12
    with pytest.raises(ValidationError):
        apply_multiplier(f, heat_symbol(), scale=-0.1)


def test_symbol_parameter_validation():
    with pytest.raises(ValidationError):
        psi_symbol().weights(np.array([1.0]), scale=0.0)
    with pytest.raises(ValidationError):
        psi_symbol().weights(np.array([1.0]), scale=-2.0)
    with pytest.raises(ValidationError):
        dyadic_symbol(3)
    from asqe.grid import SpectralSymbol
    with pytest.raises(ValidationError):
        SpectralSymbol("unknown_kind")


def test_bump_support():
    chi = chi_symbol()
    lam = np.array([0.0, 0.5, 0.999999, 1.0, 2.0, 100.0])
    w = chi.weights(lam, scale=1.0)
    assert w[0] == 1.0
    assert 0 < w[1] < 1
    assert np.all(w[3:] == 0.0)
    # scale M: support is lam < M^2
    w8 = chi.weights(np.array([63.9, 64.0, 64.1]), scale=8.0)
    assert w8[0] > 0 and w8[1] == 0.0 and w8[2] == 0.0


def test_fractional_power_weights():
    s = fractional_symbol(-1.5)
    lam = np.array([0.0, 3.0, 8.0])
    np.testing.assert_allclose(s.weights(lam, scale=2.0),
                               (1.0 + lam / 4.0) ** -0.75, rtol=1e-14)


def test_dyadic_partition_of_unity():
    g = TorusGrid(64)
    lam = g.laplacian_symbol
    total = np.zeros_like(lam)
    for m in dyadic_blocks(g):
        total += dyadic_symbol(m).weights(lam)
    assert np.max(np.abs(total - 1.0)) < 1e-12


def test_dyadic_block_localization():
    # lam = 64 sits in the plateau of the M = 8 block and in no other.
    lam = np.array([64.0])
    for m in [0, 1, 2, 4, 8, 16, 32]:
        w = dyadic_symbol(m).weights(lam)[0]
        assert abs(w - (1.0 if m == 8 else 0.0)) < 1e-15


def test_besov_norm_single_mode():
    g = TorusGrid(32)
    f = Field.from_function(g, lambda x1, x2: np.cos(8 * x1))
    val = besov_norm(f, s=1.0, p=2.0, q=2.0)
    expected = np.sqrt(65.0) * pi * np.sqrt(2.0)
    assert abs(val - expected) < 1e-10 * expected
    val_inf = besov_norm(f, s=1.0, p=2.0, q=np.inf)
    assert abs(val_inf - expected) < 1e-10 * expected


def test_besov_norm_smoothness_ordering():
    g = TorusGrid(32)
    rng = np.random.default_rng(5)
    f = Field(g, rng.standard_normal((32, 32)))
    assert besov_norm(f, -1.0, 2, 2) < besov_norm(f, 0.0, 2, 2) < besov_norm(f, 1.0, 2, 2)


def test_lp_norms():
    g = TorusGrid(16)
    f = Field.from_function(g, lambda x1, x2: np.cos(x1))
    assert abs(lp_norm(f, np.inf) - 1.0) < 1e-12
    assert abs(lp_norm(f, 2) - np.sqrt(2 * pi ** 2)) < 1e-12
    with pytest.raises(ValidationError):
        lp_norm(f, 0.5)


def test_torus_distance_wraparound():
    d = torus_distance([0.1, 0.0], [2 * pi - 0.1, 0.0])
    assert abs(d - 0.2) < 1e-12
    d2 = torus_distance([0.0, 0.3], [0.0, 0.3])
    assert d2 == 0.0
    pts = np.array([[0.0, 0.0], [pi, pi]])
    dd = torus_distance(pts, np.array([0.1, 0.0]))
    assert dd.shape == (2,)
    assert abs(dd[0] - 0.1) < 1e-12


def test_pad_truncate_round_trip():
    g = TorusGrid(16)
    rng = np.random.default_rng(9)
    f = Field(g, rng.standard_normal((16, 16)))
    c = to_fourier(f)
    # Band-limit so padding is an exact refinement.
    mask = (np.maximum(np.abs(g.k1), np.abs(g.k2)) <= 4).astype(float)
    c = c * mask
    big = pad_coefficients(c, 2)
    assert big.shape == (32, 32)
    np.testing.assert_array_equal(truncate_coefficients(big, 16), c)
    f_small = from_fourier(g, c)
    f_big = from_fourier(TorusGrid(32), big)
    np.testing.assert_allclose(f_big.values[::2, ::2], f_small.values, atol=1e-12)


def test_field_validation():
    g = TorusGrid(8)
    with pytest.raises(ValidationError):
        Field(g, np.zeros((8, 4)))
    bad = np.zeros((8, 8))
    bad[0, 0] = np.nan
    with pytest.raises(ValidationError):
        Field(g, bad)
    with pytest.raises(ValidationError):
        integrate(Field(g, bad, check=False))
