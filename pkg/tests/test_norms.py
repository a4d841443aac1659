"""Tests for the discrete critical norms."""

import math

import numpy as np
import pytest

from nscrit.fields import SpaceTimeField, SpatialField, dilate, translate
from nscrit.grid import DyadicCell, carleson_times, cell_mask, center_indices, morrey_radii, space_mask
from nscrit.norms import (
    NORM_SPACES,
    carleson_functional,
    functional_at,
    measure,
    morrey_exponent,
    norm_bmo_neg1,
    norm_L2A,
    norm_L2wLinf,
    norm_morrey,
    norm_Y2,
    norm_YKTq,
    norm_Z0,
    wiener_profile,
    yktq_morrey_branch,
)
from nscrit.presets import random_heat_like
from nscrit.utils import NormError


@pytest.fixture
def field_2d(grid_2d, rng):
    return SpaceTimeField(grid_2d, rng.standard_normal((2,) + grid_2d.sample_shape))


@pytest.mark.parametrize("space", ["y2", "z0", "ykt", "yktq", "morrey", "l2a", "l2wlinf"])
def test_zero_field_has_zero_norm(grid_2d, space):
    report = measure(SpaceTimeField.zeros(grid_2d, 2), space)
    assert report.value == 0.0


def test_z0_of_self_similar_profile(grid_2d):
    values = np.ones((1,) + grid_2d.sample_shape) / np.sqrt(grid_2d.times)[None, :, None, None]
    report = norm_Z0(SpaceTimeField(grid_2d, values))
    assert report.value == pytest.approx(1.0, rel=1e-12)
    assert report.witness.kind == "centered"


def test_l2a_of_separable_mode(grid_1d):
    x = grid_1d.coords()[0]
    a = np.sin(grid_1d.times) + 2.0
    u = SpaceTimeField(grid_1d, a[:, None] * np.cos(x)[None])
    np.testing.assert_allclose(wiener_profile(u), a, rtol=1e-12)
    assert norm_L2A(u).value == pytest.approx(math.sqrt(np.dot(grid_1d.time_weights, a**2)), rel=1e-12)


def test_l2wlinf_of_constant(grid_2d):
    u = SpaceTimeField(grid_2d, np.ones((1,) + grid_2d.sample_shape))
    assert norm_L2wLinf(u).value == pytest.approx(math.sqrt(grid_2d.time_weights.sum()))


@pytest.mark.parametrize("space", ["y2", "z0", "ykt", "yktq", "morrey", "l2a", "l2wlinf"])
def test_functional_at_reproduces_value(field_2d, space):
    report = measure(field_2d, space)
    assert functional_at(field_2d, report) == pytest.approx(report.value, rel=1e-12)


def test_y2_dominates_sampled_cylinders(field_2d):
    grid = field_2d.grid
    report = norm_Y2(field_2d, center_stride=4)
    for T in carleson_times(grid)[::2]:
        for c in center_indices(grid, 4)[::3]:
            assert carleson_functional(field_2d, float(T), grid.point(int(c))) <= report.value * (1 + 1e-9)


def test_norms_are_homogeneous(field_2d):
    for space in ("y2", "morrey", "l2a"):
        base = measure(field_2d, space).value
        assert measure(-3.0 * field_2d, space).value == pytest.approx(3.0 * base, rel=1e-10)


def test_morrey_exponent(grid_3d):
    assert morrey_exponent(grid_3d, 2.0, 5.0) == pytest.approx(-1.5)
    assert morrey_exponent(grid_3d, 5.0, 5.0) == 0.0


def test_morrey_defaults_and_errors(field_2d):
    report = norm_morrey(field_2d, 3.0)
    assert report.parameters == {"p": 3.0, "lambda": 4.0}
    assert report.witness.radius > 0
    with pytest.raises(NormError, match="p must be"):
        norm_morrey(field_2d, 0.5)
    with pytest.raises(NormError, match="λ must be"):
        norm_morrey(field_2d, 3.0, 2.0)


def test_yktq_branches(field_2d):
    report = norm_YKTq(field_2d, 8.0)
    assert report.branch in ("carleson", "morrey")
    assert report.value == max(report.parts["y2"].value, report.parts["morrey"].value)
    morrey = yktq_morrey_branch(field_2d, 8.0)
    assert morrey.inner_witness is not None
    with pytest.raises(NormError, match="parabolic dimension"):
        norm_YKTq(field_2d, 4.0)


def test_bmo_removes_mean(grid_2d):
    x = grid_2d.coords()
    wave = SpatialField(grid_2d, np.cos(x[0]))
    shifted = SpatialField(grid_2d, np.cos(x[0]) + 1.0)
    assert norm_bmo_neg1(wave).value > 0
    assert norm_bmo_neg1(shifted).value == pytest.approx(norm_bmo_neg1(wave).value, rel=1e-9)


def test_measure_errors(field_2d):
    with pytest.raises(NormError, match="Unknown norm"):
        measure(field_2d, "besov")
    with pytest.raises(NormError, match="No witness"):
        functional_at(field_2d, measure(field_2d, "bmo-1"))
    assert "bmo-1" in NORM_SPACES


def test_report_to_dict(field_2d):
    data = measure(field_2d, "ykt").to_dict()
    assert data["space"] == "ykt"
    assert set(data["parts"]) == {"y2", "z0"}
    assert data["witness"]["kind"] == "Q"
    assert data["sampling"]["center_stride"] == 1


@pytest.mark.parametrize("space, params", [("y2", {}), ("ykt", {}), ("morrey", {"p": 3.0})])
def test_norms_are_translation_and_dilation_invariant(grid_2d, rng, space, params):
    u = random_heat_like(grid_2d, rng)
    base = measure(u, space, **params).value
    assert base > 0
    assert measure(translate(u, (3, 5)), space, **params).value == pytest.approx(base, rel=1e-9)
    assert measure(dilate(u, 2.0), space, **params).value == pytest.approx(base, rel=1e-9)


def _pair_distances_sq(grid):
    """Squared minimal-image distances between all pairs of lattice points."""
    idx = np.stack(np.unravel_index(np.arange(grid.n_space_points), grid.space_shape), axis=1)
    diff = np.abs(idx[:, None, :] - idx[None, :, :])
    diff = np.minimum(diff, grid.n_space - diff) * grid.dx
    return np.sum(diff**2, axis=-1)


def _enumerate_y2(u):
    grid = u.grid
    density = u.magnitude().reshape(grid.n_time, -1) ** 2
    dist2 = _pair_distances_sq(grid)
    best = 0.0
    for T in carleson_times(grid):
        per_point = (grid.time_weights * (grid.times < T)) @ density
        masses = (dist2 <= T).astype(float) @ per_point
        best = max(best, T ** (-grid.dim / 4.0) * math.sqrt(masses.max() * grid.cell_volume))
    return best


def _enumerate_morrey(u, p, lam):
    grid = u.grid
    density = u.magnitude().reshape(grid.n_time, -1) ** p
    dist2 = _pair_distances_sq(grid)
    exponent = morrey_exponent(grid, p, lam)
    best = 0.0
    for r in morrey_radii(grid):
        ball = (dist2 <= r * r).astype(float)
        for t_c in grid.times:
            window = (grid.times > t_c - r * r) & (grid.times < t_c + r * r)
            masses = ball @ ((grid.time_weights * window) @ density)
            best = max(best, r**exponent * (masses.max() * grid.cell_volume) ** (1.0 / p))
    return best


def test_y2_matches_enumeration_on_an_indicator(grid_3d):
    band = (grid_3d.times > 0.03) & (grid_3d.times < 0.3)
    ball = space_mask(grid_3d, (0.0, 0.0, 0.0), 1.0)
    u = SpaceTimeField(grid_3d, (band[:, None, None, None] & ball[None]).astype(float))
    assert norm_Y2(u).value == pytest.approx(_enumerate_y2(u), rel=1e-9)


def test_morrey_matches_enumeration_on_a_dyadic_cell(grid_3d):
    cell = cell_mask(grid_3d, DyadicCell(0, (0, 0, 0)))
    assert len(cell) > 0
    u = SpaceTimeField(grid_3d, cell.mask().astype(float))
    assert norm_morrey(u, 2.0, 5.0).value == pytest.approx(_enumerate_morrey(u, 2.0, 5.0), rel=1e-9)


def test_yktq_decreases_in_q_for_a_point_mass(grid_2d):
    # one sample at t ≈ 0.14: the smallest inner cylinder wins for every q
    values = np.zeros(grid_2d.sample_shape)
    values[4, 0, 0] = 1.0
    u = SpaceTimeField(grid_2d, values)
    branch = [yktq_morrey_branch(u, q).value for q in (6.0, 8.0, 12.0)]
    assert branch[0] > branch[1] > branch[2] > 0
    full = [norm_YKTq(u, q).value for q in (6.0, 8.0, 12.0)]
    assert full[0] >= full[1] >= full[2]
