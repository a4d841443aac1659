"""Discrete critical norms of sampled fields.

Every supremum over cylinders runs over a finite sample set (see `carleson_times`,
`morrey_radii`, `center_indices`); the search ranks candidates with FFT ball sums and the
reported value is then recomputed directly on the winning cylinder, so a report's value
always equals its functional evaluated at its witness. Vector and tensor fields are
measured through their pointwise magnitude.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from loguru import logger
from scipy import fft

from .fields import SpaceTimeField, SpatialField
from .grid import (
    CylinderSpec,
    Grid,
    carleson_times,
    center_indices,
    cylinder_mask,
    morrey_radii,
    space_mask,
)
from .spectral import heat_extension
from .utils import NormError

NORM_SPACES = ("y2", "z0", "ykt", "yktq", "morrey", "l2a", "l2wlinf", "bmo-1")


@dataclass
class NormReport:
    """A discrete norm value together with the cylinder that attains it."""

    space: str
    value: float
    witness: Optional[CylinderSpec] = None
    branch: Optional[str] = None
    inner_witness: Optional[CylinderSpec] = None
    parameters: dict[str, float] = field(default_factory=dict)
    parts: dict[str, "NormReport"] = field(default_factory=dict)
    sampling: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "space": self.space,
            "value": self.value,
            "witness": self.witness.to_dict() if self.witness else None,
            "branch": self.branch,
            "inner_witness": self.inner_witness.to_dict() if self.inner_witness else None,
            "parameters": dict(self.parameters),
            "parts": {name: part.to_dict() for name, part in self.parts.items()},
            "sampling": dict(self.sampling),
        }


def _density(u: SpaceTimeField) -> np.ndarray:
    """Pointwise magnitude flattened to (n_time, n^dim)."""
    return u.magnitude().reshape(u.grid.n_time, -1)


def _ball_sums(grid: Grid, slices: np.ndarray, radius: float) -> np.ndarray:
    """Σ_{|y-x| <= r} slices(y) for every lattice x; slices shaped (m, n^dim)."""
    kernel = space_mask(grid, (0.0,) * grid.dim, radius).astype(float)
    axes = tuple(range(1, 1 + grid.dim))
    stacked = slices.reshape((slices.shape[0],) + grid.space_shape)
    conv = fft.irfftn(
        fft.rfftn(stacked, axes=axes, workers=-1) * fft.rfftn(kernel)[None],
        s=grid.space_shape,
        axes=axes,
        workers=-1,
    )
    return conv.reshape(slices.shape[0], -1)


def _mass(grid: Grid, density: np.ndarray, spec: CylinderSpec) -> float:
    """∫∫_cylinder density with the ladder weights and the lattice cell volume."""
    mask = cylinder_mask(grid, spec).mask().reshape(grid.n_time, -1)
    return float(np.sum(grid.time_weights[:, None] * density * mask) * grid.cell_volume)


def _sampling(grid: Grid, stride: int, **extra: Any) -> dict[str, Any]:
    info: dict[str, Any] = {
        "carleson_times": carleson_times(grid).tolist(),
        "center_stride": stride,
        "n_centers": int(center_indices(grid, stride).size),
    }
    info.update(extra)
    return info


# -- Carleson (Y2) and pointwise (Z0) parts --------------------------------------


def carleson_functional(u: SpaceTimeField, T: float, center: tuple[float, ...]) -> float:
    """T^{-dim/4} (∫∫_{Q_{T,x}} |u|²)^{1/2}."""
    grid = u.grid
    return T ** (-grid.dim / 4.0) * math.sqrt(_mass(grid, _density(u) ** 2, CylinderSpec.q(T, center)))


def norm_Y2(u: SpaceTimeField, center_stride: int = 1) -> NormReport:
    """sup over sampled Q_{T,x} of the Carleson functional."""
    grid = u.grid
    density = _density(u) ** 2
    centers = center_indices(grid, center_stride)
    best_score, best_T, best_center = -1.0, float(carleson_times(grid)[-1]), int(centers[0])
    for T in carleson_times(grid):
        weights = grid.time_weights * (grid.times < T)
        if not np.any(weights):
            continue
        sums = _ball_sums(grid, (weights @ density)[None], math.sqrt(T))[0][centers]
        idx = int(np.argmax(sums))
        score = T ** (-grid.dim / 4.0) * math.sqrt(max(float(sums[idx]), 0.0) * grid.cell_volume)
        if score > best_score:
            best_score, best_T, best_center = score, float(T), int(centers[idx])
    witness = CylinderSpec.q(best_T, grid.point(best_center))
    value = carleson_functional(u, best_T, witness.center)
    return NormReport("y2", value, witness, sampling=_sampling(grid, center_stride))


def _sample_index(grid: Grid, spec: CylinderSpec) -> tuple[int, int]:
    k = int(np.argmin(np.abs(grid.times - float(spec.t_center))))  # type: ignore[arg-type]
    lattice = tuple(int(round(c / grid.dx)) % grid.n_space for c in spec.center)
    return k, int(np.ravel_multi_index(lattice, grid.space_shape))


def pointwise_functional(u: SpaceTimeField, spec: CylinderSpec) -> float:
    """√t |u(t, x)| at the sample named by a zero-radius centered cylinder."""
    k, x = _sample_index(u.grid, spec)
    return math.sqrt(float(u.grid.times[k])) * float(_density(u)[k, x])


def norm_Z0(u: SpaceTimeField) -> NormReport:
    """max over samples of √t |u(t, x)|."""
    grid = u.grid
    density = _density(u)
    k = int(np.argmax(np.sqrt(grid.times) * density.max(axis=1)))
    x = int(np.argmax(density[k]))
    witness = CylinderSpec.centered(float(grid.times[k]), grid.point(x), 0.0)
    return NormReport("z0", pointwise_functional(u, witness), witness)


def norm_YKT(u: SpaceTimeField, center_stride: int = 1) -> NormReport:
    """‖u‖_{Y2} + ‖u‖_{Z0}; the witness is the Carleson one."""
    y2 = norm_Y2(u, center_stride)
    z0 = norm_Z0(u)
    return NormReport(
        "ykt", y2.value + z0.value, y2.witness, parts={"y2": y2, "z0": z0}, sampling=y2.sampling
    )


# -- Morrey ---------------------------------------------------------------------------


def morrey_exponent(grid: Grid, p: float, lam: float) -> float:
    """Radius power D/λ − D/p making the Morrey functional scale-invariant."""
    D = grid.parabolic_dim
    return D / lam - D / p


def _check_morrey(grid: Grid, p: float, lam: float) -> None:
    if p < 1.0:
        raise NormError(f"Morrey exponent p must be >= 1, got {p}")
    if lam < p:
        raise NormError(f"Morrey exponent λ must be >= p, got p={p}, λ={lam}")


def _morrey_search(
    grid: Grid, density: np.ndarray, p: float, exponent: float, centers: np.ndarray
) -> Optional[tuple[float, float, int, int]]:
    """Best (score, r, time index, center) over sampled centered cylinders, or None."""
    times = grid.times
    best: Optional[tuple[float, float, int, int]] = None
    rows_with_mass = np.any(density > 0, axis=1)
    for r in morrey_radii(grid):
        window = (np.abs(times[:, None] - times[None, :]) < r * r) * grid.time_weights[None, :]
        cols = np.flatnonzero(np.any(window > 0, axis=0) & rows_with_mass)
        if cols.size == 0:
            continue
        sums = _ball_sums(grid, density[cols], r)[:, centers]
        mass = window[:, cols] @ sums
        k, c = np.unravel_index(int(np.argmax(mass)), mass.shape)
        score = r**exponent * max(float(mass[k, c]) * grid.cell_volume, 0.0) ** (1.0 / p)
        if best is None or score > best[0]:
            best = (score, float(r), int(k), int(centers[c]))
    return best


def morrey_functional(u: SpaceTimeField, spec: CylinderSpec, p: float, lam: float) -> float:
    """r^{D/λ − D/p} (∫∫_cylinder |u|^p)^{1/p} on a centered cylinder."""
    grid = u.grid
    r = float(spec.radius)  # type: ignore[arg-type]
    return r ** morrey_exponent(grid, p, lam) * _mass(grid, _density(u) ** p, spec) ** (1.0 / p)


def norm_morrey(
    u: SpaceTimeField, p: float = 2.0, lam: Optional[float] = None, center_stride: int = 1
) -> NormReport:
    """Parabolic Morrey norm 𝓜^{p,λ}; λ defaults to the parabolic dimension.

    Raises:
        NormError: If p < 1 or λ < p.
    """
    grid = u.grid
    lam = float(grid.parabolic_dim if lam is None else lam)
    _check_morrey(grid, p, lam)
    exponent = morrey_exponent(grid, p, lam)
    centers = center_indices(grid, center_stride)
    best = _morrey_search(grid, _density(u) ** p, p, exponent, centers)
    radii = morrey_radii(grid)
    if best is None:
        witness = CylinderSpec.centered(float(grid.times[0]), grid.point(int(centers[0])), float(radii[0]))
    else:
        _, r, k, c = best
        witness = CylinderSpec.centered(float(grid.times[k]), grid.point(c), r)
    return NormReport(
        "morrey",
        morrey_functional(u, witness, p, lam),
        witness,
        parameters={"p": p, "lambda": lam},
        sampling=_sampling(grid, center_stride, radii=radii.tolist()),
    )


# -- YKT,q ----------------------------------------------------------------------------


def _yktq_exponents(grid: Grid, q: float) -> tuple[float, float, float]:
    """(p, radius exponent, time exponent) of the second branch."""
    D = grid.parabolic_dim
    if q <= D:
        raise NormError(f"q must exceed the parabolic dimension {D}, got {q}")
    p = 2.0 * q / D
    return p, morrey_exponent(grid, p, q), 0.5 - D / (2.0 * q)


def _band_density(u: SpaceTimeField, outer: CylinderSpec, p: float) -> np.ndarray:
    grid = u.grid
    mask = cylinder_mask(grid, outer).mask().reshape(grid.n_time, -1)
    return (_density(u) ** p) * mask


def yktq_branch_functional(u: SpaceTimeField, outer: CylinderSpec, inner: CylinderSpec, q: float) -> float:
    """T^{1/2 − D/(2q)} · Morrey_{2q/D, q}(u·𝟙_{R_{T,x}}) evaluated on `inner`."""
    grid = u.grid
    p, exponent, time_exponent = _yktq_exponents(grid, q)
    r = float(inner.radius)  # type: ignore[arg-type]
    mass = _mass(grid, _band_density(u, outer, p), inner)
    return float(outer.T) ** time_exponent * r**exponent * mass ** (1.0 / p)  # type: ignore[arg-type]


def yktq_morrey_branch(
    u: SpaceTimeField, q: float, outer_stride: Optional[int] = None, center_stride: int = 1
) -> NormReport:
    """sup over R_{T,x} of T^{1/2 − D/(2q)} ‖u·𝟙_{R_{T,x}}‖_{𝓜^{2q/D, q}}.

    Raises:
        NormError: If q does not exceed the parabolic dimension.
    """
    grid = u.grid
    p, exponent, time_exponent = _yktq_exponents(grid, q)
    outer_stride = outer_stride or max(1, grid.n_space // 4)
    inner_centers = center_indices(grid, center_stride)
    density = _density(u) ** p

    best: Optional[tuple[float, CylinderSpec, CylinderSpec]] = None
    for T in carleson_times(grid):
        band = (grid.times > T / 2.0) & (grid.times < T)
        if not np.any(band):
            continue
        for c in center_indices(grid, outer_stride):
            outer = CylinderSpec.r(float(T), grid.point(int(c)))
            ball = space_mask(grid, outer.center, outer.spatial_radius).ravel()
            masked = density * (band[:, None] & ball[None, :])
            if not np.any(masked > 0):
                continue
            found = _morrey_search(grid, masked, p, exponent, inner_centers)
            if found is None:
                continue
            score = float(T) ** time_exponent * found[0]
            if best is None or score > best[0]:
                inner = CylinderSpec.centered(float(grid.times[found[2]]), grid.point(found[3]), found[1])
                best = (score, outer, inner)

    if best is None:
        outer = CylinderSpec.r(float(carleson_times(grid)[-1]), (0.0,) * grid.dim)
        inner = CylinderSpec.centered(float(grid.times[0]), (0.0,) * grid.dim, float(morrey_radii(grid)[0]))
    else:
        _, outer, inner = best
    return NormReport(
        "yktq-morrey",
        yktq_branch_functional(u, outer, inner, q),
        outer,
        branch="morrey",
        inner_witness=inner,
        parameters={"q": q, "p": p},
        sampling=_sampling(grid, center_stride, outer_stride=outer_stride, radii=morrey_radii(grid).tolist()),
    )


def norm_YKTq(u: SpaceTimeField, q: float, center_stride: int = 1) -> NormReport:
    """max(‖u‖_{Y2}, Morrey branch); `branch` names the winner.

    Raises:
        NormError: If q does not exceed the parabolic dimension.
    """
    morrey = yktq_morrey_branch(u, q, center_stride=center_stride)
    y2 = norm_Y2(u, center_stride)
    winner = y2 if y2.value >= morrey.value else morrey
    return NormReport(
        "yktq",
        winner.value,
        winner.witness,
        branch="carleson" if winner is y2 else "morrey",
        inner_witness=winner.inner_witness,
        parameters={"q": q},
        parts={"y2": y2, "morrey": morrey},
        sampling=morrey.sampling,
    )


# -- time-integrated norms --------------------------------------------------------


def wiener_profile(u: SpaceTimeField) -> np.ndarray:
    """t ↦ ‖u(t)‖_A, the ℓ¹ mass of the Fourier-series coefficients (Euclidean over components)."""
    grid = u.grid
    full = fft.fftn(u.values, axes=u.spatial_axes, workers=-1) / grid.n_space_points
    per_component = np.abs(full).reshape(u.components, grid.n_time, -1).sum(axis=-1)
    return np.sqrt(np.sum(per_component**2, axis=0))


def norm_L2A(u: SpaceTimeField) -> NormReport:
    """(∫ ‖u(t)‖_A² dt)^{1/2} with the ladder weights."""
    a = wiener_profile(u)
    value = math.sqrt(float(np.dot(u.grid.time_weights, a**2)))
    return NormReport("l2a", value, None, sampling={"time_weights": "ladder"})


def norm_L2wLinf(u: SpaceTimeField) -> NormReport:
    """Weak-L² in time of ‖u(t)‖_∞: max_k m_k · μ{t : m(t) >= m_k}^{1/2}."""
    grid = u.grid
    density = _density(u)
    m = density.max(axis=1)
    mu = np.array([grid.time_weights[m >= mk].sum() for mk in m])
    k = int(np.argmax(m * np.sqrt(mu)))
    witness = CylinderSpec.centered(float(grid.times[k]), grid.point(int(np.argmax(density[k]))), 0.0)
    return NormReport("l2wlinf", float(m[k] * math.sqrt(mu[k])), witness)


def norm_bmo_neg1(u0: SpatialField, center_stride: int = 1) -> NormReport:
    """BMO^{-1} of initial data through the Carleson norm of its heat extension.

    A nonzero spatial mean is removed (with a warning); the constant mode is not BMO^{-1}.
    """
    coefficients = u0.coefficients.copy()
    zero = (slice(None),) + (0,) * u0.grid.dim
    scale = max(float(np.abs(coefficients).max()), 1e-300)
    if np.any(np.abs(coefficients[zero]) > 1e-12 * scale):
        logger.warning("bmo-1: removing the nonzero spatial mean of the data")
        coefficients[zero] = 0.0
    extension = heat_extension(SpatialField.from_coefficients(u0.grid, coefficients))
    y2 = norm_Y2(extension, center_stride)
    return NormReport("bmo-1", y2.value, y2.witness, parts={"y2": y2}, sampling=y2.sampling)


# -- dispatch -------------------------------------------------------------------------


def measure(u: SpaceTimeField, space: str, **params: Any) -> NormReport:
    """Compute the named norm; `params` carries p, lam, q and center_stride where relevant.

    Raises:
        NormError: On an unknown space or invalid exponents.
    """
    stride = int(params.get("center_stride", 1))
    if space == "y2":
        return norm_Y2(u, stride)
    if space == "z0":
        return norm_Z0(u)
    if space == "ykt":
        return norm_YKT(u, stride)
    if space == "yktq":
        return norm_YKTq(u, float(params.get("q", 8.0)), stride)
    if space == "morrey":
        return norm_morrey(u, float(params.get("p", 2.0)), params.get("lam"), stride)
    if space == "l2a":
        return norm_L2A(u)
    if space == "l2wlinf":
        return norm_L2wLinf(u)
    if space == "bmo-1":
        return norm_bmo_neg1(u.slice(0), stride)
    raise NormError(f"Unknown norm '{space}', expected one of {NORM_SPACES}")


def functional_at(u: SpaceTimeField, report: NormReport) -> float:
    """Recompute a report's functional directly on its witness."""
    if report.space == "y2":
        return carleson_functional(u, float(report.witness.T), report.witness.center)  # type: ignore[union-attr]
    if report.space == "z0":
        return pointwise_functional(u, report.witness)  # type: ignore[arg-type]
    if report.space == "ykt":
        return functional_at(u, report.parts["y2"]) + functional_at(u, report.parts["z0"])
    if report.space == "morrey":
        return morrey_functional(u, report.witness, report.parameters["p"], report.parameters["lambda"])  # type: ignore[arg-type]
    if report.space == "yktq-morrey":
        return yktq_branch_functional(u, report.witness, report.inner_witness, report.parameters["q"])  # type: ignore[arg-type]
    if report.space == "yktq":
        return max(functional_at(u, part) for part in report.parts.values())
    if report.space == "l2a":
        return norm_L2A(u).value
    if report.space == "l2wlinf":
        return norm_L2wLinf(u).value
    raise NormError(f"No witness functional for '{report.space}'")
