"""Tests for ensemble estimates."""

import math

import pytest

from nscrit.duhamel import QuadratureRule
from nscrit.estimates import (
    OPERATORS,
    EstimateReport,
    band_cell_morrey,
    estimate_band_defect,
    estimate_embedding_chain,
    estimate_morrey_linf,
    run_estimate,
)
from nscrit.fields import SpaceTimeField, restrict
from nscrit.grid import dyadic_partition, make_grid
from nscrit.norms import norm_morrey
from nscrit.presets import random_heat_like
from nscrit.spectral import sigma_abs
from nscrit.utils import ConfigError, SpectralError


@pytest.fixture
def small_grid():
    return make_grid(2, 2 * math.pi, 8, 0.01, 1.0, 6)


EXPECTED_PIECES = {
    "kernel_domination": 1,
    "kt_split": 3,
    "morrey_split": 2,
    "fefferman_phong": 1,
    "band_defect": 2,
    "bilinear": 1,
    "embedding": 3,
    "morrey_linf": 1,
}


@pytest.mark.parametrize("operator", OPERATORS)
def test_every_operator_runs(small_grid, operator, mocker):
    hook = mocker.Mock()
    reports = run_estimate(operator, small_grid, ensemble_size=2, seed=5, on_sample=hook)
    assert len(reports) == EXPECTED_PIECES[operator]
    assert hook.call_count == 2
    for report in reports:
        assert report.ensemble_size == 2
        assert report.degenerate + len(report.per_sample) == 2
        assert all(math.isfinite(value) and value >= 0 for value in report.per_sample)
        assert report.parameters["seed"] == 5


def test_estimates_are_reproducible(small_grid):
    first = run_estimate("kernel_domination", small_grid, ensemble_size=2, seed=11)[0]
    second = run_estimate("kernel_domination", small_grid, ensemble_size=2, seed=11)[0]
    assert first.per_sample == second.per_sample


def test_embedding_first_link_is_contractive(small_grid):
    # sup |u(t)| never exceeds the Wiener norm, and weak L² never exceeds L²
    report = estimate_embedding_chain(small_grid, ensemble_size=3, seed=2)[0]
    assert report.operator == "embedding.l2wlinf/l2a"
    assert report.max <= 1.0 + 1e-12


def test_morrey_linf_needs_large_p(small_grid):
    with pytest.raises(ConfigError, match="p must exceed"):
        estimate_morrey_linf(small_grid, sigma_abs(), p=1.5)


def test_run_estimate_errors(small_grid):
    with pytest.raises(ConfigError, match="Unknown operator"):
        run_estimate("young", small_grid)
    with pytest.raises(SpectralError):
        run_estimate("kt_split", small_grid, sigma="laplace")


def test_report_summary():
    report = EstimateReport("bilinear", 3, {"dim": 2}, [0.5, 2.0], {"sample": 1}, {"seed": 0}, 1)
    assert report.max == 2.0
    assert report.mean == pytest.approx(1.25)
    data = report.to_dict()
    assert data["constants"] == {"mean": 1.25, "max": 2.0, "per_sample": [0.5, 2.0]}
    assert data["degenerate"] == 1

    empty = EstimateReport("bilinear", 0, {}, [])
    assert empty.max == 0.0
    assert empty.mean == 0.0


def test_band_cell_morrey_single_cell(small_grid, rng):
    cell, index_set = dyadic_partition(small_grid)[0]
    u = restrict(random_heat_like(small_grid, rng), index_set)
    # α = 1/2 on a 2D grid: ρ = 8, p = 4
    assert band_cell_morrey(u, cell.j, 0.5) == pytest.approx(norm_morrey(u, 4.0, 8.0).value)
    assert band_cell_morrey(SpaceTimeField.zeros(small_grid), cell.j, 0.5) == 0.0


def test_reports_carry_the_quadrature(small_grid):
    rule = QuadratureRule("midpoint", nodes_per_panel=3)
    report = run_estimate("bilinear", small_grid, ensemble_size=1, seed=0, rule=rule)[0]
    assert report.parameters["quadrature"] == rule.to_dict()


# Constants measured at n = 16 and n = 32 must agree within this factor.
REFINEMENT_FACTOR = 5.0


def _refined(n):
    return make_grid(2, 2 * math.pi, n, 0.01, 1.0, 8)


def _assert_stable(coarse, fine):
    assert [r.operator for r in coarse] == [r.operator for r in fine]
    for a, b in zip(coarse, fine):
        assert a.per_sample and b.per_sample
        assert all(math.isfinite(v) for v in a.per_sample + b.per_sample)
        assert b.max <= REFINEMENT_FACTOR * a.max
        assert a.max <= REFINEMENT_FACTOR * b.max


@pytest.mark.slow
@pytest.mark.parametrize("operator", ["kernel_domination", "kt_split", "fefferman_phong", "embedding"])
def test_constants_are_stable_under_refinement(operator):
    coarse = run_estimate(operator, _refined(16), ensemble_size=4, seed=3)
    fine = run_estimate(operator, _refined(32), ensemble_size=4, seed=3)
    _assert_stable(coarse, fine)


@pytest.mark.slow
@pytest.mark.parametrize("q", [6.0, 10.0])
def test_band_defect_is_stable_under_refinement(q):
    coarse = estimate_band_defect(_refined(16), q=q, ensemble_size=20, seed=7)
    fine = estimate_band_defect(_refined(32), q=q, ensemble_size=20, seed=7)
    _assert_stable(coarse, fine)
    assert coarse[1].parameters["q"] == q
