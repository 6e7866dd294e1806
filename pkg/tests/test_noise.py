"""White-noise sampling: symmetry, normalization, refinement stability."""

from math import pi

import numpy as np
import pytest

from asqe.errors import ValidationError
from asqe.grid import Field, TorusGrid, integrate
from asqe.noise import (
    RngSpec,
    as_generator,
    sample_mode_increments,
    sample_spatial_white_noise,
    white_noise_coefficients,
)


def test_rngspec_reproducible():
    spec = RngSpec(master_seed=42, stream_id=3)
    a = spec.generator().standard_normal(5)
    b = spec.generator().standard_normal(5)
    np.testing.assert_array_equal(a, b)
    c = RngSpec(master_seed=42, stream_id=4).generator().standard_normal(5)
    assert np.max(np.abs(a - c)) > 1e-3


def test_substreams_independent_and_stable():
    spec = RngSpec(7)
    a = spec.stream(0).standard_normal(4)
    b = spec.stream(1).standard_normal(4)
    a2 = spec.stream(0).standard_normal(4)
    np.testing.assert_array_equal(a, a2)
    assert np.max(np.abs(a - b)) > 1e-3


def test_as_generator_accepts_both():
    gen = as_generator(RngSpec(1))
    assert isinstance(gen, np.random.Generator)
    assert as_generator(gen) is gen
    with pytest.raises(ValidationError):
        as_generator(12345)


def test_noise_field_reproducible():
    g = TorusGrid(16)
    xi = sample_spatial_white_noise(g, RngSpec(4))
    xi2 = sample_spatial_white_noise(g, RngSpec(4))
    np.testing.assert_array_equal(xi.values, xi2.values)
    assert isinstance(xi, Field)


def test_noise_hermitian_symmetry():
    g = TorusGrid(16)
    c = white_noise_coefficients(g, RngSpec(0))
    assert c[0, 0].imag == 0.0
    for k1, k2 in [(1, 0), (3, 5), (-2, 7), (5, -5)]:
        assert abs(c[k1 % 16, k2 % 16] - np.conj(c[-k1 % 16, -k2 % 16])) < 1e-15
    # synthesized field is real without taking real parts by hand
    vals = np.fft.ifft2(c) * 16 ** 2
    assert np.max(np.abs(vals.imag)) < 1e-10


def test_noise_nyquist_ring_empty():
    g = TorusGrid(8)
    c = white_noise_coefficients(g, RngSpec(2))
    sup = np.maximum(np.abs(g.k1), np.abs(g.k2))
    assert np.all(c[sup == 4] == 0.0)
    assert np.all(c[sup <= 3] != 0.0)


def test_noise_mode_variance():
    g = TorusGrid(8)
    reps = 4000
    gen = RngSpec(123).generator()
    samples = np.array([white_noise_coefficients(g, gen) for _ in range(reps)])
    target = 1.0 / (2 * pi) ** 2
    for k1, k2 in [(0, 0), (1, 0), (2, 3), (-3, 1)]:
        v = np.mean(np.abs(samples[:, k1 % 8, k2 % 8]) ** 2)
        assert abs(v - target) < 0.1 * target
    # distinct modes decorrelated
    cross = np.mean(samples[:, 1, 0] * np.conj(samples[:, 0, 1]))
    assert abs(cross) < 0.1 * target


def test_noise_pairing_against_test_function():
    # E <xi, phi>^2 = |phi|_{L^2}^2 for band-limited phi
    g = TorusGrid(8)
    phi = Field.from_function(g, lambda x1, x2: np.cos(x1) + 0.5 * np.sin(2 * x2))
    phi_sq = 2 * pi ** 2 * (1 + 0.25)
    reps = 3000
    gen = RngSpec(77).generator()
    acc = 0.0
    for _ in range(reps):
        xi = sample_spatial_white_noise(g, gen)
        acc += integrate(Field(g, xi.values * phi.values)) ** 2
    mean = acc / reps
    stderr = phi_sq * np.sqrt(2.0 / reps)
    assert abs(mean - phi_sq) < 4 * stderr


def test_mean_mode_pairing_unit_variance():
    # phi = (2pi)^{-1} constant: Var <xi, phi> = 1
    g = TorusGrid(8)
    gen = RngSpec(31).generator()
    vals = []
    for _ in range(4000):
        xi = sample_spatial_white_noise(g, gen)
        vals.append(integrate(xi) / (2 * pi))
    v = np.var(vals)
    assert abs(v - 1.0) < 3 * np.sqrt(2.0 / 4000)


def test_refinement_extends_realization():
    # Shared rings agree bit for bit between grid sizes.
    c8 = white_noise_coefficients(TorusGrid(8), RngSpec(9))
    c16 = white_noise_coefficients(TorusGrid(16), RngSpec(9))
    for k1 in range(-3, 4):
        for k2 in range(-3, 4):
            assert c8[k1 % 8, k2 % 8] == c16[k1 % 16, k2 % 16]


def test_mode_increments():
    z = sample_mode_increments(10, 0.5, RngSpec(5))
    z2 = sample_mode_increments(10, 0.5, RngSpec(5))
    np.testing.assert_array_equal(z, z2)
    assert z.shape == (10,)
    with pytest.raises(ValidationError):
        sample_mode_increments(0, 0.5, RngSpec(5))
    with pytest.raises(ValidationError):
        sample_mode_increments(10, 0.0, RngSpec(5))
    with pytest.raises(ValidationError):
        sample_mode_increments(10, -1.0, RngSpec(5))


def test_mode_increment_variance():
    z = sample_mode_increments(100_000, 0.01, RngSpec(6))
    v = np.var(z)
    assert 0.0097 < v < 0.0103


def test_independent_streams_uncorrelated():
    a = sample_mode_increments(20_000, 1.0, RngSpec(11, stream_id=0))
    b = sample_mode_increments(20_000, 1.0, RngSpec(11, stream_id=1))
    r = np.mean(a * b)
    assert abs(r) < 3.0 / np.sqrt(20_000)
