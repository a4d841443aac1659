"""Initial data, forcings and random ensembles used by the solver and the estimates."""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from loguru import logger

from .config import Config
from .fields import SpaceTimeField, SpatialField, read_nsf
from .grid import Grid
from .spectral import from_spectral, heat_extension, leray, tensor_product
from .utils import ConfigError


def _base_wavenumber(grid: Grid) -> float:
    return 2.0 * math.pi / grid.box_length


# -- deterministic data ---------------------------------------------------------


def shear(grid: Grid, amplitude: float) -> SpatialField:
    """amplitude·(sin k0 x_2, 0, ...): the single-mode divergence-free example."""
    if grid.dim < 2:
        raise ConfigError("Vector data needs dim >= 2")
    k0 = _base_wavenumber(grid)
    x = grid.coords()
    values = np.zeros((grid.dim,) + grid.space_shape)
    values[0] = amplitude * np.sin(k0 * x[1])
    return SpatialField(grid, values)


def taylor_green(grid: Grid, amplitude: float = 1.0) -> SpatialField:
    """amplitude·(sin k0x_1 cos k0x_2, −cos k0x_1 sin k0x_2, 0); −Δ acts as 2k0²."""
    if grid.dim < 2:
        raise ConfigError("Vector data needs dim >= 2")
    k0 = _base_wavenumber(grid)
    x = grid.coords()
    values = np.zeros((grid.dim,) + grid.space_shape)
    values[0] = amplitude * np.sin(k0 * x[0]) * np.cos(k0 * x[1])
    values[1] = -amplitude * np.cos(k0 * x[0]) * np.sin(k0 * x[1])
    return SpatialField(grid, values)


@dataclass
class ManufacturedFlow:
    """A forced flow with known solution w(t) = Σ a_m(t) e_m.

    Each e_m is a divergence-free eigenfunction (−Δe_m = κ_m e_m) and
    a_m(t) = β_m/κ_m + (a_m(0) − β_m/κ_m) e^{−κ_m t}. The forcing is
    F = w ⊗ w − Σ (β_m/κ_m) ∇e_m, so that ℒ(F) − B(w, w) = w − e^{tΔ}w(0).
    """

    u0: SpatialField
    forcing: SpaceTimeField
    solution: SpaceTimeField


def manufactured_flow(grid: Grid, amplitude: float = 1e-2, beta: float = 1e-2) -> ManufacturedFlow:
    """Taylor–Green plus a shear mode, both driven by a constant-in-time forcing."""
    if grid.dim < 2:
        raise ConfigError("The manufactured flow needs dim >= 2")
    k0 = _base_wavenumber(grid)
    modes = [(taylor_green(grid), 2.0 * k0**2), (shear(grid, 1.0), k0**2)]

    t = grid.times.reshape((1, -1) + (1,) * grid.dim)
    solution = np.zeros((grid.dim,) + grid.sample_shape)
    gradient = np.zeros((grid.dim * grid.dim,) + grid.space_shape)
    grad = 1j * grid.wavevectors
    grad[:, grid.nyquist_mask] = 0.0
    for e, kappa in modes:
        a = beta / kappa + (amplitude - beta / kappa) * np.exp(-kappa * t)
        solution += a * e.values[:, None]
        # F_{ji} = −(β/κ) ∂_j e_i gives Div F = β e.
        for j in range(grid.dim):
            for i in range(grid.dim):
                gradient[j * grid.dim + i] -= (beta / kappa) * from_spectral(grad[j] * e.coefficients[i], grid)

    u0 = SpatialField(grid, sum(amplitude * e.values for e, _ in modes))
    w = SpaceTimeField(grid, solution)
    linear = SpaceTimeField(grid, np.repeat(gradient[:, None], grid.n_time, axis=1))
    return ManufacturedFlow(u0, tensor_product(w, w) + linear, w)


# -- random ensembles ------------------------------------------------------------------


def _band_limited(grid: Grid, rng: np.random.Generator, components: int, band: int) -> np.ndarray:
    """Real fields whose Fourier modes satisfy |k|_∞ <= band (lattice units)."""
    shape = (components,) + grid.spectral_shape
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    lattice = np.abs(grid.wavevectors / _base_wavenumber(grid)).max(axis=0)
    coeffs *= (lattice <= band) & (lattice > 0)
    values = from_spectral(coeffs, grid)
    peak = np.abs(values).max()
    return values / peak if peak > 0 else values


def random_spatial(
    grid: Grid, rng: np.random.Generator, components: int = 1, band: int = 3, solenoidal: bool = False
) -> SpatialField:
    u = SpatialField(grid, _band_limited(grid, rng, components, band))
    return leray(u) if solenoidal else u


def random_heat_like(
    grid: Grid, rng: np.random.Generator, components: int = 1, band: int = 3, solenoidal: bool = False
) -> SpaceTimeField:
    """Heat extension of random data with a random oscillating factor in log t."""
    u = heat_extension(random_spatial(grid, rng, components, band, solenoidal))
    phase = rng.uniform(0, 2 * math.pi)
    freq = rng.uniform(0.5, 2.0)
    factor = 1.0 + 0.5 * np.sin(freq * np.log(grid.times) + phase)
    return SpaceTimeField(grid, u.values * factor.reshape((1, -1) + (1,) * grid.dim))


def random_bump(grid: Grid, rng: np.random.Generator, components: int = 1) -> SpaceTimeField:
    """A nonnegative Gaussian bump at a random place and time, copied into every component."""
    center = rng.uniform(0, grid.box_length, size=grid.dim)
    width = grid.box_length * rng.uniform(0.06, 0.2)
    t_c = math.exp(rng.uniform(math.log(grid.t_min), math.log(grid.t_max)))
    x = grid.coords()
    d2 = np.zeros(grid.space_shape)
    for a in range(grid.dim):
        diff = np.abs(x[a] - center[a])
        diff = np.minimum(diff, grid.box_length - diff)
        d2 = d2 + diff**2
    spatial = np.exp(-d2 / (2 * width**2))
    temporal = np.exp(-(np.log(grid.times / t_c) ** 2))
    values = temporal.reshape((-1,) + (1,) * grid.dim) * spatial[None]
    return SpaceTimeField(grid, np.repeat(values[None], components, axis=0))


def random_forcing(grid: Grid, rng: np.random.Generator, amplitude: float, band: int = 2) -> SpaceTimeField:
    """A random symmetric tensor forcing, heat-like in time."""
    d = grid.dim
    base = random_heat_like(grid, rng, d * d, band).values
    sym = np.zeros_like(base)
    for j in range(d):
        for i in range(d):
            sym[j * d + i] = 0.5 * (base[j * d + i] + base[i * d + j])
    return SpaceTimeField(grid, amplitude * sym)


def random_bump_forcing(grid: Grid, rng: np.random.Generator, amplitude: float) -> SpaceTimeField:
    """A space-time localized symmetric tensor: one bump profile times a random symmetric matrix."""
    d = grid.dim
    matrix = rng.standard_normal((d, d))
    matrix = matrix + matrix.T
    matrix /= np.abs(matrix).max()
    bump = random_bump(grid, rng).values[0]
    return SpaceTimeField(grid, amplitude * matrix.reshape(d * d, *([1] * (grid.dim + 1))) * bump[None])


# -- problem assembly from a config --------------------------------------------------


@dataclass
class ProblemInputs:
    u0: SpatialField
    forcing: Optional[SpaceTimeField]
    forcing_split: Optional[tuple[SpaceTimeField, SpaceTimeField]]
    exact: Optional[SpaceTimeField] = None


def build_inputs(config: Config, grid: Grid, base_dir: Optional[Path] = None) -> ProblemInputs:
    """Materialize the data section of a config on `grid`.

    Raises:
        ConfigError: If a preset cannot be built on this grid.
        FileNotFoundError / FieldError: If a referenced NSF1 file is missing or malformed.
    """
    data = config.data
    rng = np.random.default_rng(data.seed)
    base_dir = base_dir or Path.cwd()
    exact = None
    manufactured = None
    if data.initial == "manufactured" or data.forcing == "manufactured":
        manufactured = manufactured_flow(grid, data.amplitude, data.forcing_amplitude or data.amplitude)

    if data.initial == "zero":
        u0 = SpatialField.zeros(grid, grid.dim)
    elif data.initial == "shear":
        u0 = shear(grid, data.amplitude)
    elif data.initial == "taylor_green":
        u0 = taylor_green(grid, data.amplitude)
    elif data.initial == "manufactured":
        u0 = manufactured.u0  # type: ignore[union-attr]
        if data.forcing == "manufactured":
            exact = manufactured.solution  # type: ignore[union-attr]
    elif data.initial == "random":
        u0 = random_spatial(grid, rng, grid.dim, solenoidal=True) * data.amplitude
    else:
        field = read_nsf(base_dir / str(data.initial_path))
        if field.grid != grid:
            raise ConfigError("The initial data file was written on a different grid")
        u0 = field.slice(0)

    forcing: Optional[SpaceTimeField] = None
    if data.forcing == "manufactured":
        forcing = manufactured.forcing  # type: ignore[union-attr]
    elif data.forcing == "random":
        forcing = random_forcing(grid, rng, data.forcing_amplitude)
    elif data.forcing == "file":
        forcing = read_nsf(base_dir / str(data.forcing_path))
        if forcing.grid != grid:
            raise ConfigError("The forcing file was written on a different grid")

    split = None
    if forcing is not None and data.forcing_split:
        split = (forcing, random_bump_forcing(grid, rng, data.forcing_amplitude or data.amplitude))
        forcing = None
    logger.info(f"Problem data: initial={data.initial}, forcing={data.forcing}, split={split is not None}")
    return ProblemInputs(u0, forcing, split, exact)

