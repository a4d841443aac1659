"""Sampled scalar, vector and tensor fields on a grid, plus the NSF1 binary format."""

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence, TypeVar, Union

import numpy as np
from loguru import logger
from scipy import fft

from .grid import Grid, IndexSet
from .utils import FieldError, GridError

NSF_MAGIC = b"NSF1\n"


def _check_components(grid: Grid, components: int) -> None:
    if components not in (1, grid.dim, grid.dim * grid.dim):
        raise FieldError(
            f"A field on a {grid.dim}-dimensional grid has 1, {grid.dim} or {grid.dim**2} "
            f"components, got {components}"
        )


@dataclass(eq=False)
class SpatialField:
    """One time slice: values shaped (components, n, ..., n)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == self.grid.dim:
            values = values[None]
        if values.shape[1:] != self.grid.space_shape:
            raise FieldError(f"Values of shape {values.shape} do not fit grid {self.grid.space_shape}")
        _check_components(self.grid, values.shape[0])
        if not np.all(np.isfinite(values)):
            raise FieldError("Field values must be finite")
        self.values = values

    @property
    def components(self) -> int:
        return int(self.values.shape[0])

    @property
    def is_scalar(self) -> bool:
        return self.components == 1

    @property
    def is_vector(self) -> bool:
        return self.components == self.grid.dim

    @property
    def is_tensor(self) -> bool:
        return self.components == self.grid.dim**2

    @property
    def spatial_axes(self) -> tuple[int, ...]:
        return tuple(range(1, 1 + self.grid.dim))

    @cached_property
    def coefficients(self) -> np.ndarray:
        return fft.rfftn(self.values, axes=self.spatial_axes)

    @classmethod
    def from_coefficients(cls, grid: Grid, coefficients: np.ndarray) -> "SpatialField":
        axes = tuple(range(coefficients.ndim - grid.dim, coefficients.ndim))
        return cls(grid, fft.irfftn(coefficients, s=grid.space_shape, axes=axes))

    @classmethod
    def zeros(cls, grid: Grid, components: int = 1) -> "SpatialField":
        return cls(grid, np.zeros((components,) + grid.space_shape))

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean norm over components, shape (n, ..., n)."""
        return np.sqrt(np.sum(self.values**2, axis=0))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.grid.cell_volume))

    def _combine(self, other: "SpatialField", sign: float) -> "SpatialField":
        _check_compatible(self, other)
        return SpatialField(self.grid, self.values + sign * other.values)

    def __add__(self, other: "SpatialField") -> "SpatialField":
        return self._combine(other, 1.0)

    def __sub__(self, other: "SpatialField") -> "SpatialField":
        return self._combine(other, -1.0)

    def __mul__(self, c: float) -> "SpatialField":
        return SpatialField(self.grid, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "SpatialField":
        return SpatialField(self.grid, -self.values)


@dataclass(eq=False)
class SpaceTimeField:
    """Samples over the whole ladder: values shaped (components, n_time, n, ..., n)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == self.grid.dim + 1:
            values = values[None]
        if values.shape[1:] != self.grid.sample_shape:
            raise FieldError(f"Values of shape {values.shape} do not fit grid {self.grid.sample_shape}")
        _check_components(self.grid, values.shape[0])
        if not np.all(np.isfinite(values)):
            raise FieldError("Field values must be finite")
        self.values = values

    @property
    def components(self) -> int:
        return int(self.values.shape[0])

    @property
    def is_scalar(self) -> bool:
        return self.components == 1

    @property
    def is_vector(self) -> bool:
        return self.components == self.grid.dim

    @property
    def is_tensor(self) -> bool:
        return self.components == self.grid.dim**2

    @property
    def spatial_axes(self) -> tuple[int, ...]:
        return tuple(range(2, 2 + self.grid.dim))

    @cached_property
    def coefficients(self) -> np.ndarray:
        return fft.rfftn(self.values, axes=self.spatial_axes, workers=-1)

    @classmethod
    def from_coefficients(cls, grid: Grid, coefficients: np.ndarray) -> "SpaceTimeField":
        axes = tuple(range(coefficients.ndim - grid.dim, coefficients.ndim))
        return cls(grid, fft.irfftn(coefficients, s=grid.space_shape, axes=axes, workers=-1))

    @classmethod
    def zeros(cls, grid: Grid, components: int = 1) -> "SpaceTimeField":
        return cls(grid, np.zeros((components,) + grid.sample_shape))

    @classmethod
    def from_slices(cls, grid: Grid, slices: Sequence[SpatialField]) -> "SpaceTimeField":
        if len(slices) != grid.n_time:
            raise FieldError(f"Expected {grid.n_time} slices, got {len(slices)}")
        return cls(grid, np.stack([s.values for s in slices], axis=1))

    def slice(self, k: int) -> SpatialField:
        return SpatialField(self.grid, self.values[:, k])

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean norm over components, shape (n_time, n, ..., n)."""
        if self.is_scalar:
            return np.abs(self.values[0])
        return np.sqrt(np.sum(self.values**2, axis=0))

    def l2_norm(self) -> float:
        """L²((0,T) × box) norm with the ladder's quadrature weights."""
        per_time = np.sum(self.values**2, axis=(0,) + self.spatial_axes) * self.grid.cell_volume
        return float(np.sqrt(np.dot(self.grid.time_weights, per_time)))

    def _combine(self, other: "SpaceTimeField", sign: float) -> "SpaceTimeField":
        _check_compatible(self, other)
        return SpaceTimeField(self.grid, self.values + sign * other.values)

    def __add__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        return self._combine(other, 1.0)

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        return self._combine(other, -1.0)

    def __mul__(self, c: float) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, -self.values)


AnyField = Union[SpatialField, SpaceTimeField]
F = TypeVar("F", SpatialField, SpaceTimeField)


def _check_compatible(a: AnyField, b: AnyField) -> None:
    if a.grid != b.grid:
        raise FieldError("Fields live on different grids")
    if a.components != b.components:
        raise FieldError(f"Component mismatch: {a.components} vs {b.components}")


def restrict(u: SpaceTimeField, region: Union[IndexSet, np.ndarray]) -> SpaceTimeField:
    """u·𝟙_region, with the region given as an IndexSet or a boolean sample mask."""
    mask = region.mask() if isinstance(region, IndexSet) else np.asarray(region, dtype=bool)
    if mask.shape != u.grid.sample_shape:
        raise FieldError(f"Region of shape {mask.shape} does not fit grid {u.grid.sample_shape}")
    return SpaceTimeField(u.grid, u.values * mask[None])


def partition_defect(u: SpaceTimeField, partition: Sequence[tuple[object, IndexSet]]) -> float:
    """|Σ_cells ‖𝟙_cell u‖² − ‖u‖²| / ‖u‖²; zero for a partition that covers every sample once."""
    grid = u.grid
    energy = np.sum(u.values**2, axis=0) * grid.cell_volume
    energy = (energy * grid.time_weights.reshape((-1,) + (1,) * grid.dim)).ravel()
    total = float(energy.sum())
    pieces = float(sum(energy[index_set.flat].sum() for _, index_set in partition))
    return abs(pieces - total) / total if total > 0 else abs(pieces)


def translate(u: F, shift: Sequence[int]) -> F:
    """Shift a field by whole lattice steps along each spatial axis."""
    if len(shift) != u.grid.dim:
        raise FieldError(f"Shift {tuple(shift)} does not match grid dimension {u.grid.dim}")
    values = np.roll(u.values, tuple(int(s) for s in shift), axis=u.spatial_axes)
    return type(u)(u.grid, values)


def dilate(u: F, lam: float = 2.0, degree: float = 1.0) -> F:
    """λ^degree·u(λ²t, λx) on the dilated grid; degree 1 for velocities, 2 for forcings."""
    if not lam > 0:
        raise FieldError(f"Dilation factor must be positive, got {lam}")
    return type(u)(u.grid.dilated(lam), lam**degree * u.values)


# -- NSF1 ---------------------------------------------------------------------


def write_nsf(path: Path, u: SpaceTimeField) -> Path:
    """Write `u` as NSF1: magic line, JSON header line, little-endian float64 payload.

    The payload is ordered (component, time, x_dim, ..., x_1) so x_1 varies fastest.
    """
    header = u.grid.to_header()
    header["components"] = u.components
    spatial = u.spatial_axes
    payload = np.ascontiguousarray(np.transpose(u.values, (0, 1) + spatial[::-1]), dtype="<f8")
    with open(path, "wb") as f:
        f.write(NSF_MAGIC)
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        f.write(payload.tobytes())
    logger.debug(f"Wrote NSF1 field ({u.components} components) to {path}")
    return path


def read_nsf(path: Path) -> SpaceTimeField:
    """Read an NSF1 file.

    Raises:
        FileNotFoundError: If the file doesn't exist.
        FieldError: If the file is not a well-formed NSF1 field.
    """
    if not path.exists():
        raise FileNotFoundError(f"Field file not found: {path}")
    raw = path.read_bytes()
    if not raw.startswith(NSF_MAGIC):
        raise FieldError(f"{path} is not an NSF1 file")
    end = raw.find(b"\n", len(NSF_MAGIC))
    if end < 0:
        raise FieldError(f"{path} has no header line")
    try:
        header = json.loads(raw[len(NSF_MAGIC) : end].decode("utf-8"))
        grid = Grid.from_header(header)
        components = int(header["components"])
    except (ValueError, KeyError, GridError) as e:
        raise FieldError(f"Invalid NSF1 header in {path}: {e}") from e

    if (len(raw) - end - 1) % 8:
        raise FieldError(f"{path} payload is not a whole number of float64 values")
    data = np.frombuffer(raw[end + 1 :], dtype="<f8")
    expected = components * grid.n_samples
    if data.size != expected:
        raise FieldError(f"{path} holds {data.size} values, header announces {expected}")
    stored = data.reshape((components, grid.n_time) + grid.space_shape)
    spatial = tuple(range(2, 2 + grid.dim))
    values = np.transpose(stored, (0, 1) + spatial[::-1]).astype(np.float64)
    return SpaceTimeField(grid, values)
