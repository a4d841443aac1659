"""Shared fixtures for nscrit tests."""

import math
from pathlib import Path

import numpy as np
import pytest

from nscrit.grid import Grid, make_grid


@pytest.fixture
def grid_1d() -> Grid:
    return make_grid(1, 2 * math.pi, 32, 0.01, 1.0, 8)


@pytest.fixture
def grid_2d() -> Grid:
    """2D box [0, 2π)² with 16² points and an 8-sample geometric ladder."""
    return make_grid(2, 2 * math.pi, 16, 0.01, 1.0, 8)


@pytest.fixture
def grid_3d() -> Grid:
    return make_grid(3, 2 * math.pi, 8, 0.01, 1.0, 8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def temp_output_dir(tmp_path: Path) -> Path:
    """Temporary output directory that is guaranteed to be empty."""
    out = tmp_path / "output"
    out.mkdir()
    return out
