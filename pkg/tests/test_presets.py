"""Tests for data presets, random ensembles and problem assembly."""

import numpy as np
import pytest

from nscrit.config import Config
from nscrit.fields import SpaceTimeField, write_nsf
from nscrit.presets import (
    build_inputs,
    manufactured_flow,
    random_bump,
    random_forcing,
    random_heat_like,
    random_spatial,
    shear,
    taylor_green,
)
from nscrit.spectral import heat_extension, max_divergence
from nscrit.utils import ConfigError


def _config(**data):
    return Config.from_dict({"grid": {"dim": 2, "n_space": 8, "n_time": 4}, "data": data})


def test_deterministic_presets_are_divergence_free(grid_2d, grid_3d):
    assert max_divergence(shear(grid_3d, 1.0)) < 1e-12
    tg = taylor_green(grid_2d, 2.0)
    assert max_divergence(tg) < 1e-12
    assert np.abs(tg.values).max() == pytest.approx(2.0, rel=1e-6)


def test_vector_presets_need_two_dimensions(grid_1d):
    with pytest.raises(ConfigError):
        shear(grid_1d, 1.0)
    with pytest.raises(ConfigError):
        taylor_green(grid_1d)
    with pytest.raises(ConfigError):
        manufactured_flow(grid_1d)


def test_manufactured_flow(grid_2d):
    flow = manufactured_flow(grid_2d, amplitude=1e-2, beta=2e-2)
    assert flow.forcing.is_tensor
    assert flow.solution.is_vector
    assert max_divergence(flow.solution) < 1e-12
    assert max_divergence(flow.u0) < 1e-12


def test_random_spatial(grid_2d, rng):
    u = random_spatial(grid_2d, rng, 2)
    assert np.abs(u.values).max() == pytest.approx(1.0)
    assert abs(u.values.mean()) < 1e-12
    w = random_spatial(grid_2d, rng, 2, solenoidal=True)
    assert max_divergence(w) < 1e-12


def test_random_heat_like_is_bounded_by_its_extension(grid_2d):
    u = random_heat_like(grid_2d, np.random.default_rng(3))
    base = heat_extension(random_spatial(grid_2d, np.random.default_rng(3)))
    assert np.all(np.abs(u.values) <= 1.5 * np.abs(base.values) + 1e-12)


def test_random_bump(grid_2d, rng):
    bump = random_bump(grid_2d, rng, 2)
    assert bump.values.min() >= 0
    np.testing.assert_array_equal(bump.values[0], bump.values[1])
    assert bump.values.max() <= 1.0


def test_random_forcing_is_symmetric(grid_3d, rng):
    forcing = random_forcing(grid_3d, rng, 0.5)
    v = forcing.values
    for j in range(3):
        for i in range(3):
            np.testing.assert_array_equal(v[j * 3 + i], v[i * 3 + j])


@pytest.mark.parametrize("initial", ["zero", "shear", "taylor_green", "random"])
def test_build_inputs_presets(initial):
    config = _config(initial=initial, amplitude=1e-3)
    inputs = build_inputs(config, config.make_grid())
    assert inputs.u0.is_vector
    assert inputs.forcing is None
    assert inputs.exact is None
    assert max_divergence(inputs.u0) < 1e-10


def test_build_inputs_manufactured():
    config = _config(initial="manufactured", forcing="manufactured")
    inputs = build_inputs(config, config.make_grid())
    assert inputs.exact is not None
    assert inputs.forcing is not None and inputs.forcing.is_tensor


def test_build_inputs_split_forcing():
    config = _config(forcing="random", forcing_amplitude=1e-3, forcing_split=True)
    inputs = build_inputs(config, config.make_grid())
    assert inputs.forcing is None
    first, second = inputs.forcing_split
    assert first.is_tensor and second.is_tensor
    assert not np.allclose(first.values, second.values)
    # the localized part is symmetric and decays away from its bump
    np.testing.assert_array_equal(second.values[1], second.values[2])
    assert np.abs(second.values).min() < 1e-3 * np.abs(second.values).max()


def test_build_inputs_from_file(tmp_path):
    config = _config(initial="file", initial_path="u0.nsf")
    grid = config.make_grid()
    write_nsf(tmp_path / "u0.nsf", heat_extension(shear(grid, 1e-3)))
    inputs = build_inputs(config, grid, base_dir=tmp_path)
    np.testing.assert_allclose(inputs.u0.values, heat_extension(shear(grid, 1e-3)).values[:, 0])


def test_build_inputs_rejects_foreign_grid(tmp_path, grid_2d):
    write_nsf(tmp_path / "u0.nsf", SpaceTimeField.zeros(grid_2d, 2))
    config = _config(initial="file", initial_path="u0.nsf")
    with pytest.raises(ConfigError, match="different grid"):
        build_inputs(config, config.make_grid(), base_dir=tmp_path)


def test_build_inputs_missing_file(tmp_path):
    config = _config(initial="file", initial_path="absent.nsf")
    with pytest.raises(FileNotFoundError):
        build_inputs(config, config.make_grid(), base_dir=tmp_path)
