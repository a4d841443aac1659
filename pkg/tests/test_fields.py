"""Tests for sampled fields, restriction, symmetries and the NSF1 format."""

import numpy as np
import pytest

from nscrit.fields import (
    NSF_MAGIC,
    SpaceTimeField,
    SpatialField,
    dilate,
    partition_defect,
    read_nsf,
    restrict,
    translate,
    write_nsf,
)
from nscrit.grid import IndexSet, dyadic_partition
from nscrit.utils import FieldError


def _random_field(grid, rng, components=1):
    return SpaceTimeField(grid, rng.standard_normal((components,) + grid.sample_shape))


def test_scalar_values_gain_component_axis(grid_2d):
    u = SpatialField(grid_2d, np.ones(grid_2d.space_shape))
    assert u.values.shape == (1, 16, 16)
    assert u.is_scalar


def test_component_count_checked(grid_2d):
    with pytest.raises(FieldError, match="components"):
        SpatialField(grid_2d, np.zeros((3,) + grid_2d.space_shape))
    tensor = SpaceTimeField.zeros(grid_2d, 4)
    assert tensor.is_tensor


def test_shape_and_finiteness_checked(grid_2d):
    with pytest.raises(FieldError, match="do not fit"):
        SpaceTimeField(grid_2d, np.zeros((1, 3, 16, 16)))
    values = np.zeros((1,) + grid_2d.sample_shape)
    values[0, 0, 0, 0] = np.nan
    with pytest.raises(FieldError, match="finite"):
        SpaceTimeField(grid_2d, values)


def test_arithmetic(grid_2d, rng):
    u = _random_field(grid_2d, rng)
    v = _random_field(grid_2d, rng)
    np.testing.assert_allclose((u + v - v).values, u.values)
    np.testing.assert_allclose((2.0 * u).values, (u * 2.0).values)
    np.testing.assert_allclose((-u).values, -u.values)
    with pytest.raises(FieldError):
        u + _random_field(grid_2d, rng, 2)


def test_l2_norm_of_constant(grid_2d):
    u = SpaceTimeField(grid_2d, np.ones((1,) + grid_2d.sample_shape))
    volume = grid_2d.box_length**2
    assert u.l2_norm() == pytest.approx(np.sqrt(volume * grid_2d.time_weights.sum()))


def test_coefficients_round_trip(grid_2d, rng):
    u = _random_field(grid_2d, rng, 2)
    back = SpaceTimeField.from_coefficients(grid_2d, u.coefficients)
    np.testing.assert_allclose(back.values, u.values, atol=1e-12)


def test_slices(grid_2d, rng):
    u = _random_field(grid_2d, rng)
    rebuilt = SpaceTimeField.from_slices(grid_2d, [u.slice(k) for k in range(grid_2d.n_time)])
    np.testing.assert_array_equal(rebuilt.values, u.values)
    with pytest.raises(FieldError, match="slices"):
        SpaceTimeField.from_slices(grid_2d, [u.slice(0)])


def test_restrict_full_and_empty(grid_2d, rng):
    u = _random_field(grid_2d, rng)
    np.testing.assert_array_equal(restrict(u, IndexSet.full(grid_2d)).values, u.values)
    assert not restrict(u, IndexSet.empty(grid_2d)).values.any()
    with pytest.raises(FieldError):
        restrict(u, np.ones((2, 2), dtype=bool))


def test_dyadic_pythagoras(grid_2d, rng):
    u = _random_field(grid_2d, rng, 2)
    cells = dyadic_partition(grid_2d)
    pieces = sum(restrict(u, index_set).l2_norm() ** 2 for _, index_set in cells[:50])
    rest = sum(restrict(u, index_set).l2_norm() ** 2 for _, index_set in cells[50:])
    assert pieces + rest == pytest.approx(u.l2_norm() ** 2, rel=1e-12)
    assert partition_defect(u, cells) < 1e-12


def test_partition_defect_detects_missing_cells(grid_2d, rng):
    u = _random_field(grid_2d, rng)
    cells = dyadic_partition(grid_2d)
    assert partition_defect(u, cells[1:]) > 0


def test_translate(grid_2d, rng):
    u = _random_field(grid_2d, rng)
    shifted = translate(u, (3, -2))
    assert shifted.values[0, 0, 3, 14] == u.values[0, 0, 0, 0]
    assert shifted.l2_norm() == pytest.approx(u.l2_norm())
    with pytest.raises(FieldError):
        translate(u, (1,))


def test_dilate(grid_2d, rng):
    u = _random_field(grid_2d, rng)
    v = dilate(u, 2.0)
    assert v.grid.box_length == pytest.approx(grid_2d.box_length / 2)
    np.testing.assert_allclose(v.values, 2.0 * u.values)
    forcing = dilate(u, 2.0, degree=2.0)
    np.testing.assert_allclose(forcing.values, 4.0 * u.values)
    with pytest.raises(FieldError):
        dilate(u, 0.0)


def test_nsf_round_trip(grid_3d, rng, tmp_path):
    u = _random_field(grid_3d, rng, 3)
    path = write_nsf(tmp_path / "u.nsf", u)
    assert path.read_bytes().startswith(NSF_MAGIC)
    back = read_nsf(path)
    assert back.grid == grid_3d
    np.testing.assert_array_equal(back.values, u.values)


def test_nsf_x1_varies_fastest(grid_2d, tmp_path):
    values = np.zeros((1,) + grid_2d.sample_shape)
    values[0, 0, 1, 0] = 7.0  # x1 index 1
    path = write_nsf(tmp_path / "u.nsf", SpaceTimeField(grid_2d, values))
    raw = path.read_bytes()
    payload = np.frombuffer(raw[raw.index(b"\n", len(NSF_MAGIC)) + 1 :], dtype="<f8")
    assert payload[1] == 7.0


def test_nsf_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_nsf(tmp_path / "missing.nsf")
    bad = tmp_path / "bad.nsf"
    bad.write_bytes(b"NOPE\n{}\n")
    with pytest.raises(FieldError, match="not an NSF1"):
        read_nsf(bad)
    broken = tmp_path / "broken.nsf"
    broken.write_bytes(NSF_MAGIC + b'{"dim": 2}\n')
    with pytest.raises(FieldError, match="header"):
        read_nsf(broken)
