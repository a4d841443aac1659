"""Tests for Fourier multipliers, projections and dealiased products."""

import math

import numpy as np
import pytest

from nscrit.fields import SpaceTimeField, SpatialField
from nscrit.grid import make_grid
from nscrit.presets import random_spatial, shear
from nscrit.spectral import (
    apply_symbol,
    curl_norm,
    dealiased_product,
    divergence,
    frac_laplacian,
    from_spectral,
    get_symbol,
    heat,
    heat_extension,
    hilbert_1d,
    leray,
    max_divergence,
    parseval_defect,
    pressure_gradient,
    registered_symbols,
    sigma_abs,
    sigma_b,
    sigma_partial,
    tensor_divergence,
    tensor_product,
    to_spectral,
)
from nscrit.utils import FieldError, SpectralError


def _mode(grid, func, axis=0):
    x = grid.coords()
    return SpatialField(grid, func(x[axis]))


def test_heat_identity_and_single_mode(grid_2d):
    u = _mode(grid_2d, np.cos)
    np.testing.assert_allclose(heat(u, 0.0).values, u.values, atol=1e-14)
    np.testing.assert_allclose(heat(u, 1.0).values, math.exp(-1.0) * u.values, atol=1e-14)
    with pytest.raises(SpectralError, match="t >= 0"):
        heat(u, -1.0)


def test_heat_semigroup(grid_3d, rng):
    u = random_spatial(grid_3d, rng, 3)
    two_steps = heat(heat(u, 0.3), 0.5)
    np.testing.assert_allclose(two_steps.values, heat(u, 0.8).values, atol=1e-12 * np.abs(u.values).max())


def test_heat_extension_matches_heat(grid_2d, rng):
    u0 = random_spatial(grid_2d, rng, 2)
    ext = heat_extension(u0)
    k = 5
    np.testing.assert_allclose(ext.values[:, k], heat(u0, grid_2d.times[k]).values, atol=1e-12)


def test_apply_symbol_examples(grid_2d):
    cos = _mode(grid_2d, np.cos)
    sin = _mode(grid_2d, np.sin)
    np.testing.assert_allclose(apply_symbol(sigma_abs(), cos).values, cos.values, atol=1e-12)
    np.testing.assert_allclose(apply_symbol(sigma_partial(0), sin).values, cos.values, atol=1e-12)


def test_apply_symbol_linear(grid_2d, rng):
    u = random_spatial(grid_2d, rng)
    v = random_spatial(grid_2d, rng)
    sigma = sigma_b(0, 1, 0)
    lhs = apply_symbol(sigma, 2.0 * u + v * -3.0)
    rhs = 2.0 * apply_symbol(sigma, u) + apply_symbol(sigma, v) * -3.0
    np.testing.assert_allclose(lhs.values, rhs.values, atol=1e-12)


def test_symbols_are_homogeneous(grid_3d):
    xi = grid_3d.wavevectors
    for sigma in registered_symbols(3):
        assert sigma.homogeneity_defect(xi) < 1e-12, sigma.name
    assert len(registered_symbols(3)) == 1 + 3 + 27


def test_symbol_registry():
    assert get_symbol("abs", 3).name == "abs"
    assert get_symbol("partial_2", 3).name == "partial_2"
    assert get_symbol("b_1_2_3", 3).name == "b_1_2_3"
    with pytest.raises(SpectralError, match="axis"):
        get_symbol("partial_3", 2)
    with pytest.raises(SpectralError, match="Unknown"):
        get_symbol("laplace", 3)


def test_symbol_vanishes_at_origin(grid_3d):
    assert get_symbol("b_1_1_1", 3).evaluate(grid_3d.wavevectors)[0, 0, 0] == 0.0


def test_leray_examples(grid_3d, rng):
    x = grid_3d.coords()
    gradient = SpatialField(grid_3d, np.stack([-np.sin(x[0]), np.zeros_like(x[0]), np.zeros_like(x[0])]))
    np.testing.assert_allclose(leray(gradient).values, 0.0, atol=1e-13)

    u = shear(grid_3d, 1.0)
    np.testing.assert_allclose(leray(u).values, u.values, atol=1e-13)

    w = random_spatial(grid_3d, rng, 3)
    once = leray(w)
    np.testing.assert_allclose(leray(once).values, once.values, atol=1e-12)
    assert max_divergence(once) < 1e-12


def test_leray_needs_vectors(grid_1d, grid_2d):
    with pytest.raises(SpectralError, match="dim >= 2"):
        leray(SpatialField.zeros(grid_1d))
    with pytest.raises(SpectralError, match="vector"):
        leray(SpatialField.zeros(grid_2d, 1))


def test_frac_laplacian(grid_2d, rng):
    cos = _mode(grid_2d, np.cos)
    np.testing.assert_allclose(frac_laplacian(cos, 1.0).values, cos.values, atol=1e-12)
    u = random_spatial(grid_2d, rng)
    np.testing.assert_allclose(frac_laplacian(u, 0.0).values, u.values, atol=1e-12)
    back = frac_laplacian(frac_laplacian(u, 0.7), -0.7)
    np.testing.assert_allclose(back.values, u.values, atol=1e-12)


def test_hilbert(grid_1d, rng):
    cos = _mode(grid_1d, np.cos)
    np.testing.assert_allclose(hilbert_1d(cos).values, _mode(grid_1d, np.sin).values, atol=1e-13)
    constant = SpatialField(grid_1d, np.full(grid_1d.space_shape, 3.0))
    np.testing.assert_allclose(hilbert_1d(constant).values, 0.0, atol=1e-13)
    u = random_spatial(grid_1d, rng)
    np.testing.assert_allclose(hilbert_1d(hilbert_1d(u)).values, -u.values, atol=1e-12)


def test_hilbert_is_one_dimensional(grid_2d):
    with pytest.raises(SpectralError, match="one-dimensional"):
        hilbert_1d(SpatialField.zeros(grid_2d))


def test_divergence_and_curl(grid_2d):
    x = grid_2d.coords()
    u = SpatialField(grid_2d, np.stack([np.sin(x[0]), np.zeros_like(x[0])]))
    np.testing.assert_allclose(divergence(u).values[0], np.cos(x[0]), atol=1e-12)
    assert curl_norm(u) < 1e-12
    assert curl_norm(shear(grid_2d, 1.0)) > 1.0
    with pytest.raises(FieldError):
        divergence(SpatialField.zeros(grid_2d))


def test_tensor_divergence_convention(grid_2d):
    # F_{ji} = u_j v_i with u = (1, 0), v = (sin x1, 0): (Div F)_1 = ∂_1 sin x1
    x = grid_2d.coords()
    values = np.zeros((4,) + grid_2d.space_shape)
    values[0] = np.sin(x[0])
    div = tensor_divergence(SpatialField(grid_2d, values))
    np.testing.assert_allclose(div.values[0], np.cos(x[0]), atol=1e-12)
    np.testing.assert_allclose(div.values[1], 0.0, atol=1e-12)


def test_dealiased_product_of_resolved_modes(grid_2d):
    cos = _mode(grid_2d, np.cos)
    product = from_spectral(dealiased_product(cos.coefficients, cos.coefficients, grid_2d), grid_2d)
    np.testing.assert_allclose(product, cos.values**2, atol=1e-12)


def test_tensor_product_components(grid_2d, rng):
    u = random_spatial(grid_2d, rng, 2, band=2)
    v = random_spatial(grid_2d, rng, 2, band=2)
    uv = tensor_product(u, v)
    # band 2 products stay below the Nyquist frequency, so dealiasing is exact
    np.testing.assert_allclose(uv.values[0 * 2 + 1], u.values[0] * v.values[1], atol=1e-12)
    with pytest.raises(FieldError):
        tensor_product(u, SpatialField.zeros(grid_2d))


def test_pressure_gradient_single_mode(grid_3d):
    # u = (sin x2, 0, 0): u⊗u has only the (1,1) entry, whose double divergence vanishes
    u = shear(grid_3d, 1.0)
    np.testing.assert_allclose(pressure_gradient(u).values, 0.0, atol=1e-12)


def test_pressure_gradient_taylor_green(grid_2d):
    # u = (sin x cos y, −cos x sin y): p = (cos 2x + cos 2y)/4
    x = grid_2d.coords()
    u = SpatialField(grid_2d, np.stack([np.sin(x[0]) * np.cos(x[1]), -np.cos(x[0]) * np.sin(x[1])]))
    grad = pressure_gradient(u)
    np.testing.assert_allclose(grad.values[0], -0.5 * np.sin(2 * x[0]), atol=1e-12)
    np.testing.assert_allclose(grad.values[1], -0.5 * np.sin(2 * x[1]), atol=1e-12)


def test_pressure_gradient_is_a_gradient(grid_3d, rng):
    u = leray(random_spatial(grid_3d, rng, 3, band=2))
    forcing = random_spatial(grid_3d, rng, 9, band=2)
    grad = pressure_gradient(u, forcing)
    assert curl_norm(grad) < 1e-10 * max(grad.l2_norm(), 1.0)
    np.testing.assert_allclose(leray(grad).values, 0.0, atol=1e-12)


def test_space_time_fields_transform_slice_by_slice(grid_2d, rng):
    u = SpaceTimeField(grid_2d, rng.standard_normal((2,) + grid_2d.sample_shape))
    coeffs = to_spectral(u.values, grid_2d)
    np.testing.assert_allclose(coeffs, u.coefficients)
    assert parseval_defect(u.values, grid_2d) < 1e-12
