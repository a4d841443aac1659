"""Space-time grids: time ladders over a periodic box, parabolic cylinders, dyadic cells."""

import csv
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from loguru import logger

from .utils import GridError

SPACINGS = ("uniform", "geometric", "clustered")
CYLINDER_KINDS = ("Q", "R", "S", "centered")
CELL_KINDS = ("R_cell", "Q_cell")

# Centers closer than this (in lattice units) to a lattice point snap onto it.
LATTICE_SNAP = 1e-9


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class Grid:
    """Finite time ladder over the periodic box [0, L)^dim.

    Spatial samples sit at x = i·L/n along every axis. Field arrays are indexed
    (component, time, x_1, ..., x_dim).
    """

    dim: int
    box_length: float
    n_space: int
    t_min: float
    t_max: float
    n_time: int
    spacing: str = "geometric"
    accumulation: Optional[float] = None

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not _is_power_of_two(self.n_space) or self.n_space < 4:
            raise GridError(f"n_space must be a power of two >= 4, got {self.n_space}")
        if not self.box_length > 0:
            raise GridError(f"box_length must be positive, got {self.box_length}")
        if not self.t_min > 0:
            raise GridError(f"t_min must be positive, got {self.t_min}")
        if not self.t_max > self.t_min:
            raise GridError(f"t_max must exceed t_min, got t_min={self.t_min}, t_max={self.t_max}")
        if self.n_time < 2:
            raise GridError(f"n_time must be at least 2, got {self.n_time}")
        if self.spacing not in SPACINGS:
            raise GridError(f"Unknown time spacing '{self.spacing}', expected one of {SPACINGS}")
        if self.spacing == "clustered":
            if self.accumulation is None or not self.accumulation > self.t_max:
                raise GridError("clustered ladders need an accumulation point above t_max")

    # -- time ladder -------------------------------------------------------

    @cached_property
    def times(self) -> np.ndarray:
        if self.spacing == "uniform":
            return np.linspace(self.t_min, self.t_max, self.n_time)
        if self.spacing == "geometric":
            return np.geomspace(self.t_min, self.t_max, self.n_time)
        a = float(self.accumulation)  # type: ignore[arg-type]
        return a - np.geomspace(a - self.t_min, a - self.t_max, self.n_time)

    @property
    def ratio(self) -> float:
        """Constant ratio t_{k+1}/t_k of a geometric ladder."""
        if self.spacing != "geometric":
            raise GridError("ratio is only defined for geometric ladders")
        return float((self.t_max / self.t_min) ** (1.0 / (self.n_time - 1)))

    @cached_property
    def time_edges(self) -> np.ndarray:
        """Cell boundaries owned by each time sample (n_time + 1 values)."""
        t = self.times
        if self.spacing == "geometric":
            root = math.sqrt(self.ratio)
            return np.concatenate([t / root, [t[-1] * root]])
        mid = 0.5 * (t[1:] + t[:-1])
        first = max(0.0, t[0] - (mid[0] - t[0]))
        last = t[-1] + (t[-1] - mid[-1])
        if self.accumulation is not None:
            last = min(last, self.accumulation)
        return np.concatenate([[first], mid, [last]])

    @cached_property
    def time_weights(self) -> np.ndarray:
        return np.diff(self.time_edges)

    # -- spatial lattice ---------------------------------------------------

    @property
    def dx(self) -> float:
        return self.box_length / self.n_space

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def parabolic_dim(self) -> int:
        return self.dim + 2

    @property
    def space_shape(self) -> tuple[int, ...]:
        return (self.n_space,) * self.dim

    @property
    def sample_shape(self) -> tuple[int, ...]:
        return (self.n_time,) + self.space_shape

    @property
    def n_space_points(self) -> int:
        return self.n_space**self.dim

    @property
    def n_samples(self) -> int:
        return self.n_time * self.n_space_points

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(self.n_space) * self.dx

    def coords(self) -> np.ndarray:
        """Lattice coordinates, shape (dim, n, ..., n)."""
        return np.stack(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    def point(self, flat_index: int) -> tuple[float, ...]:
        idx = np.unravel_index(int(flat_index), self.space_shape)
        return tuple(float(i) * self.dx for i in idx)

    @cached_property
    def periodic_distance(self) -> np.ndarray:
        """Minimal-image distance of every lattice point to the origin."""
        return np.sqrt(_distance_squared(self, (0.0,) * self.dim))

    # -- frequency lattice -------------------------------------------------

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n_space,) * (self.dim - 1) + (self.n_space // 2 + 1,)

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Frequency vectors of the real-to-complex layout, shape (dim, *spectral_shape)."""
        scale = 2.0 * np.pi / self.box_length
        full = np.fft.fftfreq(self.n_space, d=1.0 / self.n_space) * scale
        half = np.fft.rfftfreq(self.n_space, d=1.0 / self.n_space) * scale
        axes = [full] * (self.dim - 1) + [half]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def wavenumber_sq(self) -> np.ndarray:
        return np.sum(self.wavevectors**2, axis=0)

    @cached_property
    def wavenumber(self) -> np.ndarray:
        return np.sqrt(self.wavenumber_sq)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on every frequency sitting on a Nyquist plane."""
        mask = np.zeros(self.spectral_shape, dtype=bool)
        half = self.n_space // 2
        for axis in range(self.dim):
            index: list[Any] = [slice(None)] * self.dim
            index[axis] = half
            mask[tuple(index)] = True
        return mask

    # -- derived grids and serialization ------------------------------------

    def dilated(self, lam: float) -> "Grid":
        """Grid carrying λu(λ²t, λx) on the same sample indices."""
        accumulation = None if self.accumulation is None else self.accumulation / lam**2
        return replace(
            self,
            box_length=self.box_length / lam,
            t_min=self.t_min / lam**2,
            t_max=self.t_max / lam**2,
            accumulation=accumulation,
        )

    def to_header(self) -> dict[str, Any]:
        header: dict[str, Any] = {
            "dim": self.dim,
            "L": self.box_length,
            "n_space": self.n_space,
            "n_time": self.n_time,
            "t_min": self.t_min,
            "t_max": self.t_max,
            "spacing": self.spacing,
        }
        if self.accumulation is not None:
            header["accumulation"] = self.accumulation
        return header

    @classmethod
    def from_header(cls, header: dict[str, Any]) -> "Grid":
        try:
            return cls(
                dim=int(header["dim"]),
                box_length=float(header["L"]),
                n_space=int(header["n_space"]),
                t_min=float(header["t_min"]),
                t_max=float(header["t_max"]),
                n_time=int(header["n_time"]),
                spacing=str(header.get("spacing", "geometric")),
                accumulation=header.get("accumulation"),
            )
        except KeyError as e:
            raise GridError(f"Grid header is missing key {e}") from e


def make_grid(
    dim: int,
    box_length: float,
    n_space: int,
    t_min: float,
    t_max: float,
    n_time: int,
    spacing: str = "geometric",
    accumulation: Optional[float] = None,
) -> Grid:
    """Build a validated grid.

    Raises:
        GridError: On invalid parameters (non-power-of-two n_space, t_min <= 0, ...).
    """
    grid = Grid(dim, float(box_length), n_space, float(t_min), float(t_max), n_time, spacing, accumulation)
    logger.debug(
        f"Grid dim={dim} L={box_length:.4g} n={n_space} t=[{t_min:.3g}, {t_max:.3g}] "
        f"x{n_time} ({spacing})"
    )
    return grid


# -- cylinders ----------------------------------------------------------------


@dataclass(frozen=True)
class CylinderSpec:
    """A parabolic region Q_{T,x}, R_{T,x}, S_{T,x} or (t_c - r², t_c + r²) × B(x, r)."""

    kind: str
    center: tuple[float, ...]
    T: Optional[float] = None
    radius: Optional[float] = None
    t_center: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in CYLINDER_KINDS:
            raise GridError(f"Unknown cylinder kind '{self.kind}'")
        if self.kind == "centered":
            if self.radius is None or self.t_center is None or self.radius < 0:
                raise GridError("centered cylinders need radius >= 0 and t_center")
        elif self.T is None or not self.T > 0:
            raise GridError(f"{self.kind} cylinders need T > 0")

    @classmethod
    def q(cls, T: float, center: Sequence[float]) -> "CylinderSpec":
        return cls("Q", tuple(float(c) for c in center), T=float(T))

    @classmethod
    def r(cls, T: float, center: Sequence[float]) -> "CylinderSpec":
        return cls("R", tuple(float(c) for c in center), T=float(T))

    @classmethod
    def s(cls, T: float, center: Sequence[float]) -> "CylinderSpec":
        return cls("S", tuple(float(c) for c in center), T=float(T))

    @classmethod
    def centered(cls, t_center: float, center: Sequence[float], radius: float) -> "CylinderSpec":
        return cls(
            "centered", tuple(float(c) for c in center), radius=float(radius), t_center=float(t_center)
        )

    @property
    def spatial_radius(self) -> float:
        if self.kind == "centered":
            return float(self.radius)  # type: ignore[arg-type]
        scale = 10.0 if self.kind == "S" else 1.0
        return math.sqrt(scale * float(self.T))  # type: ignore[arg-type]

    def time_window(self) -> tuple[float, float]:
        """Open time interval (lo, hi) of the region, before intersecting with t > 0."""
        if self.kind == "centered":
            r2 = float(self.radius) ** 2  # type: ignore[arg-type]
            return float(self.t_center) - r2, float(self.t_center) + r2  # type: ignore[arg-type]
        T = float(self.T)  # type: ignore[arg-type]
        lo = {"Q": 0.0, "R": T / 2.0, "S": T / 4.0}[self.kind]
        return lo, T

    def saturates(self, grid: Grid) -> bool:
        """True when the ball covers the whole box or the time window covers the ladder."""
        covers_space = self.spatial_radius >= grid.box_length * math.sqrt(grid.dim) / 2.0
        lo, hi = self.time_window()
        covers_time = lo <= 0.0 and hi > grid.t_max
        return covers_space or covers_time

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "center": list(self.center),
            "T": self.T,
            "radius": self.radius,
            "t_center": self.t_center,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CylinderSpec":
        return cls(
            kind=data["kind"],
            center=tuple(data["center"]),
            T=data.get("T"),
            radius=data.get("radius"),
            t_center=data.get("t_center"),
        )


@dataclass(frozen=True, eq=False)
class IndexSet:
    """Sorted flat indices into the raveled (time, space) sample array of a grid."""

    grid: Grid
    flat: np.ndarray

    @classmethod
    def from_mask(cls, grid: Grid, mask: np.ndarray) -> "IndexSet":
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != grid.sample_shape:
            raise GridError(f"Mask shape {mask.shape} does not match grid {grid.sample_shape}")
        return cls(grid, np.flatnonzero(mask))

    @classmethod
    def full(cls, grid: Grid) -> "IndexSet":
        return cls(grid, np.arange(grid.n_samples))

    @classmethod
    def empty(cls, grid: Grid) -> "IndexSet":
        return cls(grid, np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.flat.size)

    def mask(self) -> np.ndarray:
        dense = np.zeros(self.grid.n_samples, dtype=bool)
        dense[self.flat] = True
        return dense.reshape(self.grid.sample_shape)

    def time_indices(self) -> np.ndarray:
        return self.flat // self.grid.n_space_points

    def space_indices(self) -> np.ndarray:
        return self.flat % self.grid.n_space_points

    def to_csv(self, path: Path, label: str = "") -> Path:
        """Write one row per sample: label, time index, lattice indices, t, coordinates."""
        grid = self.grid
        lattice = np.unravel_index(self.space_indices(), grid.space_shape)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            axes = [f"i{a + 1}" for a in range(grid.dim)]
            writer.writerow(["label", "time_index", *axes, "t", *[f"x{a + 1}" for a in range(grid.dim)]])
            for n, k in enumerate(self.time_indices()):
                idx = [int(lattice[a][n]) for a in range(grid.dim)]
                writer.writerow(
                    [label, int(k), *idx, float(grid.times[k]), *[i * grid.dx for i in idx]]
                )
        return path


def _distance_squared(grid: Grid, center: Sequence[float]) -> np.ndarray:
    """Squared minimal-image distance from `center`, computed in lattice units."""
    if len(center) != grid.dim:
        raise GridError(f"Center {tuple(center)} does not match grid dimension {grid.dim}")
    n = grid.n_space
    c = np.asarray(center, dtype=float) / grid.dx
    snapped = np.round(c)
    c = np.where(np.abs(c - snapped) < LATTICE_SNAP, snapped, c)
    dist2 = np.zeros(grid.space_shape)
    for axis in range(grid.dim):
        d = np.abs(np.arange(n) - c[axis]) % n
        d = np.minimum(d, n - d) * grid.dx
        shape = [1] * grid.dim
        shape[axis] = n
        dist2 = dist2 + (d**2).reshape(shape)
    return dist2


def space_mask(grid: Grid, center: Sequence[float], radius: float) -> np.ndarray:
    """Lattice points within periodic distance `radius` of `center` (closed ball)."""
    return _distance_squared(grid, center) <= radius**2


def time_mask(grid: Grid, spec: CylinderSpec) -> np.ndarray:
    lo, hi = spec.time_window()
    t = grid.times
    return (t > max(lo, 0.0)) & (t < hi)


def cylinder_mask(grid: Grid, spec: CylinderSpec) -> IndexSet:
    """Samples of `grid` inside the parabolic region `spec` (possibly empty)."""
    dense = time_mask(grid, spec)[:, None] & space_mask(grid, spec.center, spec.spatial_radius).ravel()[None, :]
    return IndexSet(grid, np.flatnonzero(dense))


# -- dyadic cells -------------------------------------------------------------


@dataclass(frozen=True)
class DyadicCell:
    """R_{j,k} = {1 <= 4^j t < 4, 2^j x - k in [0,1)^dim}; Q_{j,k} uses 0 < 4^j t < 16."""

    j: int
    k: tuple[int, ...]
    kind: str = "R_cell"

    def __post_init__(self) -> None:
        if self.kind not in CELL_KINDS:
            raise GridError(f"Unknown dyadic cell kind '{self.kind}'")

    def time_bounds(self) -> tuple[float, float]:
        scale = 4.0 ** (-self.j)
        return (scale, 4.0 * scale) if self.kind == "R_cell" else (0.0, 16.0 * scale)

    def to_dict(self) -> dict[str, Any]:
        return {"j": self.j, "k": list(self.k), "kind": self.kind}


def dyadic_scale(t: np.ndarray) -> np.ndarray:
    """The integer j with 1 <= 4^j t < 4 for every positive t."""
    t = np.asarray(t, dtype=float)
    j = np.ceil(-np.log(t) / np.log(4.0))
    j = np.where(4.0**j * t >= 4.0, j - 1, j)
    j = np.where(4.0**j * t < 1.0, j + 1, j)
    return j.astype(np.int64)


def cell_mask(grid: Grid, cell: DyadicCell) -> IndexSet:
    lo, hi = cell.time_bounds()
    t = grid.times
    in_time = (t >= lo) & (t < hi) if cell.kind == "R_cell" else (t > 0) & (t < hi)
    per_axis = np.floor(2.0**cell.j * grid.axis).astype(np.int64)
    in_space = np.ones(grid.space_shape, dtype=bool)
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = grid.n_space
        in_space = in_space & (per_axis == cell.k[axis]).reshape(shape)
    return IndexSet(grid, np.flatnonzero(in_time[:, None] & in_space.ravel()[None, :]))


def dyadic_partition(grid: Grid) -> list[tuple[DyadicCell, IndexSet]]:
    """Split every grid sample into exactly one R-cell."""
    scales = dyadic_scale(grid.times)
    n_points = grid.n_space_points
    cells: list[tuple[DyadicCell, IndexSet]] = []
    for j in np.unique(scales):
        t_idx = np.flatnonzero(scales == j)
        per_axis = np.floor(2.0 ** float(j) * grid.axis).astype(np.int64)
        keys = np.stack(np.meshgrid(*([per_axis] * grid.dim), indexing="ij"), axis=-1)
        keys = keys.reshape(-1, grid.dim)
        unique, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        order = np.argsort(inverse, kind="stable")
        starts = np.searchsorted(inverse[order], np.arange(len(unique) + 1))
        for c, kvec in enumerate(unique):
            space_idx = order[starts[c] : starts[c + 1]]
            flat = (t_idx[:, None] * n_points + space_idx[None, :]).ravel()
            cells.append((DyadicCell(int(j), tuple(int(v) for v in kvec)), IndexSet(grid, flat)))
    logger.debug(f"Dyadic partition: {len(cells)} cells over scales {sorted(set(scales.tolist()))}")
    return cells


def write_partition_csv(path: Path, partition: list[tuple[DyadicCell, IndexSet]]) -> Path:
    """Concatenate the masks of a partition into one CSV, one row per sample."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["j", "k", "time_index", "space_index"])
        for cell, index_set in partition:
            key = " ".join(str(v) for v in cell.k)
            for k, s in zip(index_set.time_indices(), index_set.space_indices(), strict=True):
                writer.writerow([cell.j, key, int(k), int(s)])
    return path


# -- sample sets for discrete suprema ---------------------------------------


def carleson_times(grid: Grid) -> np.ndarray:
    """T = t_min·2^m up to the first value reaching 2·t_max."""
    m_max = int(math.ceil(math.log2(2.0 * grid.t_max / grid.t_min)))
    return grid.t_min * 2.0 ** np.arange(m_max + 1)


def morrey_radii(grid: Grid) -> np.ndarray:
    """r = sqrt(t_min·2^m) while the ball does not exceed the box diagonal."""
    r_max = grid.box_length * math.sqrt(grid.dim) / 2.0
    radii = []
    m = 0
    while True:
        r = math.sqrt(grid.t_min * 2.0**m)
        if r > r_max:
            break
        radii.append(r)
        m += 1
    return np.asarray(radii)


def center_indices(grid: Grid, stride: int = 1) -> np.ndarray:
    """Flat indices of the lattice points whose coordinates are multiples of `stride`."""
    if stride < 1:
        raise GridError(f"center stride must be >= 1, got {stride}")
    sub = np.arange(0, grid.n_space, stride)
    mesh = np.meshgrid(*([sub] * grid.dim), indexing="ij")
    return np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid.space_shape)
