"""Fourier multipliers on the periodic box: heat flow, Leray projection, symbols, products.

Coefficient arrays use the real-to-complex layout of `scipy.fft.rfftn` with backward
normalization; the trailing `grid.dim` axes are spectral, leading axes are batch axes
(components, time).
"""

import itertools
import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import fft

from .fields import AnyField, F, SpaceTimeField, SpatialField
from .grid import Grid
from .utils import FieldError, SpectralError

SymbolFunc = Callable[[np.ndarray], np.ndarray]


def _axes(grid: Grid, ndim: int) -> tuple[int, ...]:
    return tuple(range(ndim - grid.dim, ndim))


def to_spectral(values: np.ndarray, grid: Grid) -> np.ndarray:
    return fft.rfftn(values, axes=_axes(grid, values.ndim), workers=-1)


def from_spectral(coefficients: np.ndarray, grid: Grid) -> np.ndarray:
    return fft.irfftn(coefficients, s=grid.space_shape, axes=_axes(grid, coefficients.ndim), workers=-1)


def _rebuild(u: F, coefficients: np.ndarray) -> F:
    return type(u).from_coefficients(u.grid, coefficients)


# -- symbols ------------------------------------------------------------------


@dataclass(frozen=True)
class Symbol:
    """A homogeneous Fourier multiplier σ(ξ) of the given degree.

    `imaginary` symbols act as i·σ(ξ) for a real odd σ, which keeps real fields real.
    """

    name: str
    func: SymbolFunc
    degree: float = 1.0
    imaginary: bool = False

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        """σ on stacked frequency vectors `xi` of shape (dim, ...); σ(0) is taken as 0."""
        xi = np.asarray(xi, dtype=float)
        nonzero = np.sum(xi**2, axis=0) > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.broadcast_to(np.asarray(self.func(xi), dtype=float), nonzero.shape)
        if not np.all(np.isfinite(raw[nonzero])):
            raise SpectralError(f"Symbol '{self.name}' is not finite away from the origin")
        return np.where(nonzero, raw, 0.0)

    def multiplier(self, grid: Grid) -> np.ndarray:
        values = self.evaluate(grid.wavevectors)
        if not self.imaginary:
            return values
        mult = 1j * values
        mult[grid.nyquist_mask] = 0.0
        return mult

    def homogeneity_defect(self, xi: np.ndarray, factors: tuple[float, ...] = (2.0, 3.0)) -> float:
        """max |σ(λξ) − λ^degree σ(ξ)| / |λ^degree σ(ξ)| over nonzero samples."""
        base = self.evaluate(xi)
        worst = 0.0
        for lam in factors:
            expected = lam**self.degree * base
            scaled = self.evaluate(lam * np.asarray(xi, dtype=float))
            mask = np.abs(expected) > 0
            if np.any(mask):
                worst = max(worst, float(np.max(np.abs(scaled[mask] - expected[mask]) / np.abs(expected[mask]))))
        return worst

    def __repr__(self) -> str:
        return f"Symbol({self.name!r}, degree={self.degree})"


def _norm(xi: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(xi**2, axis=0))


def sigma_abs() -> Symbol:
    return Symbol("abs", _norm)


def sigma_partial(j: int) -> Symbol:
    """ξ_j, the symbol of ∂_j (0-based axis, 1-based name)."""

    def func(xi: np.ndarray) -> np.ndarray:
        return xi[j]

    return Symbol(f"partial_{j + 1}", func, imaginary=True)


def sigma_b(i: int, j: int, k: int) -> Symbol:
    """δ_ik ξ_j − ξ_i ξ_j ξ_k / |ξ|², the entries of ℙ∇· acting on u_j v_k."""

    def func(xi: np.ndarray) -> np.ndarray:
        delta = 1.0 if i == k else 0.0
        return delta * xi[j] - xi[i] * xi[j] * xi[k] / np.sum(xi**2, axis=0)

    return Symbol(f"b_{i + 1}_{j + 1}_{k + 1}", func, imaginary=True)


def registered_symbols(dim: int) -> list[Symbol]:
    symbols = [sigma_abs()] + [sigma_partial(j) for j in range(dim)]
    symbols += [sigma_b(i, j, k) for i, j, k in itertools.product(range(dim), repeat=3)]
    return symbols


def get_symbol(name: str, dim: int) -> Symbol:
    """Resolve 'abs', 'partial_<j>' or 'b_<i>_<j>_<k>' (1-based indices).

    Raises:
        SpectralError: On an unknown name or an index beyond `dim`.
    """
    if name == "abs":
        return sigma_abs()
    match = re.fullmatch(r"partial_(\d)", name)
    if match:
        j = int(match.group(1)) - 1
        if not 0 <= j < dim:
            raise SpectralError(f"Symbol '{name}' needs an axis in 1..{dim}")
        return sigma_partial(j)
    match = re.fullmatch(r"b_(\d)_(\d)_(\d)", name)
    if match:
        idx = [int(g) - 1 for g in match.groups()]
        if not all(0 <= v < dim for v in idx):
            raise SpectralError(f"Symbol '{name}' needs indices in 1..{dim}")
        return sigma_b(*idx)
    raise SpectralError(f"Unknown symbol '{name}'")


# -- basic multipliers --------------------------------------------------------


def heat_multiplier(grid: Grid, t: float) -> np.ndarray:
    if t < 0:
        raise SpectralError(f"Heat flow needs t >= 0, got {t}")
    return np.exp(-t * grid.wavenumber_sq)


def heat(u: F, t: float) -> F:
    """e^{tΔ}u, applied slice by slice."""
    return _rebuild(u, u.coefficients * heat_multiplier(u.grid, t))


def heat_extension(u0: SpatialField) -> SpaceTimeField:
    """The caloric extension t ↦ e^{tΔ}u0 on the ladder of u0's grid."""
    grid = u0.grid
    decay = np.exp(-grid.times[:, None] * grid.wavenumber_sq.reshape(1, -1)).reshape(
        (grid.n_time,) + grid.spectral_shape
    )
    coefficients = u0.coefficients[:, None] * decay[None]
    return SpaceTimeField.from_coefficients(grid, coefficients)


def apply_symbol(sigma: Symbol, u: F) -> F:
    return _rebuild(u, u.coefficients * sigma.multiplier(u.grid))


def frac_laplacian(u: F, alpha: float) -> F:
    """|D|^α u; the zero mode is kept for α = 0 and removed otherwise."""
    grid = u.grid
    k = grid.wavenumber
    with np.errstate(divide="ignore"):
        mult = np.where(k > 0, k**alpha, 1.0 if alpha == 0 else 0.0)
    return _rebuild(u, u.coefficients * mult)


def hilbert_multiplier(grid: Grid) -> np.ndarray:
    mult = -1j * np.sign(grid.wavevectors[0])
    mult[grid.nyquist_mask] = 0.0
    return mult


def hilbert_1d(u: F) -> F:
    """The periodic Hilbert transform, symbol −i·sgn(ξ)."""
    if u.grid.dim != 1:
        raise SpectralError(f"The Hilbert transform is one-dimensional, grid has dim {u.grid.dim}")
    return _rebuild(u, u.coefficients * hilbert_multiplier(u.grid))


def leray_coefficients(coefficients: np.ndarray, grid: Grid) -> np.ndarray:
    """ℙû = û − ξ(ξ·û)/|ξ|² for coefficients shaped (dim, ..., *spectral_shape)."""
    xi = grid.wavevectors
    k2 = grid.wavenumber_sq
    inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    extra = coefficients.ndim - grid.dim - 1
    xi_b = xi.reshape((grid.dim,) + (1,) * extra + grid.spectral_shape)
    dot = np.sum(xi_b * coefficients, axis=0)
    return coefficients - xi_b * (dot * inv)[None]


def leray(u: F) -> F:
    """Leray projection onto divergence-free vector fields.

    Raises:
        SpectralError: For non-vector fields or a one-dimensional grid.
    """
    if u.grid.dim < 2:
        raise SpectralError("Leray projection needs dim >= 2")
    if not u.is_vector:
        raise SpectralError(f"Leray projection needs a vector field, got {u.components} components")
    return _rebuild(u, leray_coefficients(u.coefficients, u.grid))


def _derivative_multipliers(grid: Grid) -> np.ndarray:
    mult = 1j * grid.wavevectors
    mult[:, grid.nyquist_mask] = 0.0
    return mult


def divergence_coefficients(coefficients: np.ndarray, grid: Grid) -> np.ndarray:
    """Σ_j iξ_j û_j for vector coefficients shaped (dim, ..., *spectral_shape)."""
    mult = _derivative_multipliers(grid)
    extra = coefficients.ndim - grid.dim - 1
    mult = mult.reshape((grid.dim,) + (1,) * extra + grid.spectral_shape)
    return np.sum(mult * coefficients, axis=0)


def divergence(u: F) -> F:
    if not u.is_vector:
        raise FieldError(f"Divergence needs a vector field, got {u.components} components")
    return _rebuild(u, divergence_coefficients(u.coefficients, u.grid)[None])


def max_divergence(u: AnyField) -> float:
    """sup |∇·u| relative to sup |u| (absolute when u vanishes)."""
    div = np.abs(divergence(u).values).max()
    scale = np.abs(u.values).max()
    return float(div / scale) if scale > 0 else float(div)


def tensor_divergence_coefficients(coefficients: np.ndarray, grid: Grid) -> np.ndarray:
    """(Div F)_i = Σ_j ∂_j F_{ji}, with tensor component j·dim + i holding F_{ji}."""
    d = grid.dim
    mult = _derivative_multipliers(grid)
    extra = coefficients.ndim - grid.dim - 1
    out = np.zeros((d,) + coefficients.shape[1:], dtype=complex)
    for i in range(d):
        for j in range(d):
            m = mult[j].reshape((1,) * extra + grid.spectral_shape)
            out[i] += m * coefficients[j * d + i]
    return out


def tensor_divergence(field: F) -> F:
    if not field.is_tensor:
        raise FieldError(f"Tensor divergence needs {field.grid.dim**2} components, got {field.components}")
    return _rebuild(field, tensor_divergence_coefficients(field.coefficients, field.grid))


def curl_norm(u: AnyField) -> float:
    """L² norm (over all samples, unit weights) of the curl of a vector field."""
    if not u.is_vector:
        raise FieldError("curl_norm needs a vector field")
    grid = u.grid
    if grid.dim == 1:
        return 0.0
    mult = _derivative_multipliers(grid)
    extra = u.coefficients.ndim - grid.dim - 1
    d = [m.reshape((1,) * extra + grid.spectral_shape) for m in mult]
    c = u.coefficients
    if grid.dim == 2:
        parts = [d[0] * c[1] - d[1] * c[0]]
    else:
        parts = [d[1] * c[2] - d[2] * c[1], d[2] * c[0] - d[0] * c[2], d[0] * c[1] - d[1] * c[0]]
    values = from_spectral(np.stack(parts), grid)
    return float(np.sqrt(np.sum(values**2) * grid.cell_volume))


# -- dealiased products ------------------------------------------------------------


def _fine_size(grid: Grid) -> int:
    return 3 * grid.n_space // 2


def _spectral_blocks(dim: int, n: int, m: int) -> list[tuple[tuple[slice, ...], tuple[slice, ...]]]:
    """Matching (coarse, fine) index blocks of the modes |k| < n/2 in both layouts."""
    h = n // 2
    full_axis = ((slice(0, h), slice(0, h)), (slice(n - h + 1, n), slice(m - h + 1, m)))
    blocks = []
    for combo in itertools.product(full_axis, repeat=dim - 1):
        coarse = tuple(c[0] for c in combo) + (slice(0, h),)
        fine = tuple(c[1] for c in combo) + (slice(0, h),)
        blocks.append((coarse, fine))
    return blocks


def _to_fine(coefficients: np.ndarray, grid: Grid) -> np.ndarray:
    n, d = grid.n_space, grid.dim
    m = _fine_size(grid)
    lead = coefficients.shape[: coefficients.ndim - d]
    padded = np.zeros(lead + (m,) * (d - 1) + (m // 2 + 1,), dtype=complex)
    for coarse, fine in _spectral_blocks(d, n, m):
        padded[(Ellipsis,) + fine] = coefficients[(Ellipsis,) + coarse]
    padded *= (m / n) ** d
    return fft.irfftn(padded, s=(m,) * d, axes=_axes(grid, padded.ndim), workers=-1)


def _from_fine(values: np.ndarray, grid: Grid) -> np.ndarray:
    n, d = grid.n_space, grid.dim
    m = _fine_size(grid)
    fine_coeffs = fft.rfftn(values, axes=_axes(grid, values.ndim), workers=-1) * (n / m) ** d
    lead = values.shape[: values.ndim - d]
    out = np.zeros(lead + grid.spectral_shape, dtype=complex)
    for coarse, fine in _spectral_blocks(d, n, m):
        out[(Ellipsis,) + coarse] = fine_coeffs[(Ellipsis,) + fine]
    return out


def dealiased_product(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    """Coefficients of the pointwise product a·b by the 3/2 rule; leading axes broadcast."""
    return _from_fine(_to_fine(a, grid) * _to_fine(b, grid), grid)


def outer_product_coefficients(u: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    """Dealiased coefficients of u_j v_i at tensor index j·dim + i."""
    fu = _to_fine(u, grid)
    fv = _to_fine(v, grid)
    d = grid.dim
    prods = np.stack([fu[j] * fv[i] for j in range(d) for i in range(d)])
    return _from_fine(prods, grid)


def tensor_product(u: F, v: F) -> F:
    """The dealiased tensor u ⊗ v of two vector fields."""
    if not (u.is_vector and v.is_vector):
        raise FieldError("tensor_product needs two vector fields")
    if u.grid != v.grid:
        raise FieldError("Fields live on different grids")
    return _rebuild(u, outer_product_coefficients(u.coefficients, v.coefficients, u.grid))


def pressure_gradient(u: F, forcing: Optional[F] = None) -> F:
    """∇p for the pressure solving −Δp = ∇·∇·(u ⊗ u − F), so that ℙDiv G = Div G − ∇p
    with G = F − u ⊗ u.
    """
    grid = u.grid
    d = grid.dim
    g = -outer_product_coefficients(u.coefficients, u.coefficients, grid)
    if forcing is not None:
        if not forcing.is_tensor:
            raise FieldError("Forcing must be a tensor field")
        g = g + forcing.coefficients
    xi = grid.wavevectors
    k2 = grid.wavenumber_sq
    inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    extra = g.ndim - d - 1
    shape = (1,) * extra + grid.spectral_shape
    contraction = sum(
        xi[j].reshape(shape) * xi[i].reshape(shape) * g[j * d + i] for j in range(d) for i in range(d)
    )
    p_grad = np.stack([xi[i].reshape(shape) * contraction * inv.reshape(shape) for i in range(d)])
    mult = 1j * np.ones(grid.spectral_shape)
    mult[grid.nyquist_mask] = 0.0
    return _rebuild(u, p_grad * mult.reshape(shape))


def parseval_defect(values: np.ndarray, grid: Grid) -> float:
    """|Σ|u|²·dx^d − Σ|û|²·L^d/N^{2d}| relative to the first, over the trailing spatial axes."""
    physical = float(np.sum(values**2) * grid.cell_volume)
    full = fft.fftn(values, axes=_axes(grid, values.ndim))
    spectral = float(np.sum(np.abs(full) ** 2) * grid.box_length**grid.dim / grid.n_space_points**2)
    return abs(physical - spectral) / physical if physical > 0 else abs(spectral)
