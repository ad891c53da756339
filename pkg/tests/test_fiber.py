import numpy as np
import pytest

from fiberspec import FiberFunction


def test_integral_is_center_coefficient():
    u = FiberFunction.from_real_coeffs([(1, 0.3, -0.2), (3, 0.0, 0.5)], 8,
                                       const=1.25)
    assert u.integral() == pytest.approx(1.25, abs=1e-15)


def test_evaluation_matches_closed_forms():
    xs = np.linspace(0, 1, 37, endpoint=False)
    assert np.allclose(FiberFunction.cosine(2, 8).evaluate(xs).real,
                       np.cos(4 * np.pi * xs), atol=1e-13)
    assert np.allclose(FiberFunction.sine(3, 8).evaluate(xs).real,
                       np.sin(6 * np.pi * xs), atol=1e-13)
    assert np.allclose(FiberFunction.mode(1, 8).evaluate(xs),
                       np.exp(2j * np.pi * xs), atol=1e-13)


def test_real_builders_are_hermitian():
    u = FiberFunction.from_real_coeffs([(1, 0.7, 0.1), (2, -0.3, 0.9)], 6,
                                       const=0.4)
    assert u.hermitian_defect() < 1e-15
    assert np.abs(u.evaluate(np.linspace(0, 1, 11)).imag).max() < 1e-14


def test_derivative_coefficients():
    u = FiberFunction.cosine(2, 8)
    xs = np.linspace(0, 1, 23, endpoint=False)
    expected = -4 * np.pi * np.sin(4 * np.pi * xs)
    assert np.allclose(u.derivative().evaluate(xs).real, expected, atol=1e-12)


def test_c1_norm_of_cosine():
    # the 4N grid hits the extrema of cos(4 pi x) and its derivative exactly
    u = FiberFunction.cosine(2, 16)
    assert u.c1_norm() == pytest.approx(1.0 + 4 * np.pi, abs=1e-12)


def test_pair_matches_quadrature():
    rng = np.random.default_rng(5)
    terms_a = [(k, rng.standard_normal(), rng.standard_normal()) for k in (1, 2, 5)]
    terms_b = [(k, rng.standard_normal(), rng.standard_normal()) for k in (1, 3, 5)]
    a = FiberFunction.from_real_coeffs(terms_a, 12, const=0.3)
    b = FiberFunction.from_real_coeffs(terms_b, 12, const=-0.8)
    xs = np.arange(4096) / 4096
    quad = np.mean(a.evaluate(xs) * b.evaluate(xs))
    assert a.pair(b) == pytest.approx(quad, abs=1e-12)
    assert FiberFunction.cosine(1, 8).pair(FiberFunction.cosine(1, 8)) == \
        pytest.approx(0.5, abs=1e-15)


def test_from_function_recovers_band_limited():
    target = FiberFunction.from_real_coeffs([(2, 1.0, -0.5), (4, 0.25, 0.0)], 8,
                                            const=2.0)
    sampled = FiberFunction.from_function(lambda x: target.evaluate(x), 8)
    assert np.abs(sampled.coeffs - target.coeffs).max() < 1e-13


def test_resize_keeps_low_modes():
    u = FiberFunction.from_real_coeffs([(1, 1.0, 0.0), (5, 0.5, 0.0)], 8)
    down = u.resize(3)
    assert down.trunc == 3
    assert down.coeffs[1 + 3] == u.coeffs[1 + 8]
    up = down.resize(8)
    assert up.coeffs[5 + 8] == 0.0


def test_values_on_grid_matches_evaluate():
    u = FiberFunction.from_real_coeffs([(1, 0.2, 0.7), (3, -0.4, 0.1)], 6)
    m = 64
    xs = np.arange(m) / m
    assert np.abs(u.values_on_grid(m) - u.evaluate(xs)).max() < 1e-12
    with pytest.raises(ValueError):
        u.values_on_grid(8)


def test_arithmetic():
    a = FiberFunction.cosine(1, 4)
    b = FiberFunction.sine(1, 4)
    xs = np.linspace(0, 1, 9, endpoint=False)
    combo = 2.0 * a - b
    expected = 2 * np.cos(2 * np.pi * xs) - np.sin(2 * np.pi * xs)
    assert np.allclose(combo.evaluate(xs).real, expected, atol=1e-13)
    # mixed truncations align to the larger order
    c = FiberFunction.cosine(1, 9)
    assert (a + c).trunc == 9
