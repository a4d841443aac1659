"""Parabolic potentials: kernel domination of heat-smoothed multipliers, Riesz-type
potentials and Fefferman–Phong type ratios."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from loguru import logger
from scipy import fft

from .fields import SpaceTimeField
from .grid import Grid
from .norms import norm_morrey
from .spectral import Symbol, dealiased_product, from_spectral, to_spectral
from .utils import FieldError, NormError, QuadratureError


def parabolic_kernel(grid: Grid, tau: float, exponent: float) -> np.ndarray:
    """(√τ + |z|)^{-exponent} on the lattice, |z| the minimal-image distance to the origin."""
    return (np.sqrt(tau) + grid.periodic_distance) ** (-exponent)


def _convolve(grid: Grid, density: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Σ_y kernel(x - y) density(y) dx^d over trailing spatial axes."""
    return from_spectral(to_spectral(density, grid) * fft.rfftn(kernel), grid) * grid.cell_volume


@dataclass
class DominationResult:
    """Empirical constant of |σ(D)e^{τΔ}(uv)| <= C (√τ + |·|)^{-(d+1)} * |uv|."""

    c_emp: float
    max_violation: float
    n_train: int
    n_heldout: int
    gaps: list[float]

    def to_dict(self) -> dict[str, object]:
        return {
            "c_emp": self.c_emp,
            "max_violation": self.max_violation,
            "n_train": self.n_train,
            "n_heldout": self.n_heldout,
            "gaps": self.gaps,
        }


def default_gaps(grid: Grid, count: int = 8) -> np.ndarray:
    idx = np.unique(np.linspace(0, grid.n_time - 1, min(count, grid.n_time)).round().astype(int))
    return grid.times[idx]


def kernel_domination_residual(
    sigma: Symbol,
    u: SpaceTimeField,
    v: SpaceTimeField,
    gaps: Optional[Sequence[float]] = None,
) -> DominationResult:
    """Fit C on even source samples, then report the worst excess on the odd ones.

    The left side uses the dealiased product, the right side the sampled |u·v|.
    """
    if not (u.is_scalar and v.is_scalar) or u.grid != v.grid:
        raise FieldError("kernel_domination_residual needs two scalar fields on one grid")
    grid = u.grid
    gaps = default_gaps(grid) if gaps is None else np.asarray(gaps, dtype=float)
    if np.any(np.asarray(gaps) <= 0):
        raise QuadratureError("Time gaps must be positive")

    product = dealiased_product(u.coefficients, v.coefficients, grid)[0]
    weight = np.abs(u.values[0] * v.values[0])
    train = np.arange(grid.n_time) % 2 == 0
    sigma_mult = sigma.multiplier(grid)

    lhs_all, rhs_all = [], []
    for tau in gaps:
        lhs_all.append(np.abs(from_spectral(product * sigma_mult * np.exp(-tau * grid.wavenumber_sq), grid)))
        rhs_all.append(_convolve(grid, weight, parabolic_kernel(grid, tau, grid.dim + 1)))
    lhs = np.stack(lhs_all)
    rhs = np.stack(rhs_all)

    positive = rhs > 0
    ratio = np.divide(lhs, rhs, out=np.zeros_like(lhs), where=positive)
    c_emp = float(ratio[:, train].max(initial=0.0))
    excess = lhs[:, ~train] - c_emp * rhs[:, ~train]
    violation = float(max(excess.max(initial=0.0), 0.0))
    if violation > 0:
        logger.debug(f"kernel domination: held-out excess {violation:.3e} over C={c_emp:.3e}")
    return DominationResult(
        c_emp, violation, int(train.sum()), int((~train).sum()), [float(t) for t in gaps]
    )


def _parabolic_potential(grid: Grid, density: np.ndarray, exponent: float) -> np.ndarray:
    """Σ_{s_k < t_i} w_k Σ_y (√(t_i - s_k) + |x - y|)^{-exponent} density(s_k, y) dx^d."""
    times = grid.times
    weights = grid.time_weights
    density_hat = to_spectral(density, grid)
    out = np.zeros_like(density)
    for i in range(1, grid.n_time):
        kernels = np.stack([parabolic_kernel(grid, float(times[i] - times[k]), exponent) for k in range(i)])
        kernel_hat = fft.rfftn(kernels, axes=tuple(range(1, 1 + grid.dim)))
        acc = np.sum(weights[:i].reshape((-1,) + (1,) * grid.dim) * kernel_hat * density_hat[:i], axis=0)
        out[i] = from_spectral(acc, grid) * grid.cell_volume
    return out


def riesz_potential(w: SpaceTimeField, alpha: float) -> SpaceTimeField:
    """∫_0^t ∫ (√(t-s) + |x-y|)^{-(d+1+α)} |w(s, y)| dy ds, by a left rectangle rule in time.

    Raises:
        QuadratureError: If α is outside [0, (d+2)/2).
    """
    grid = w.grid
    if not 0.0 <= alpha < grid.parabolic_dim / 2.0:
        raise QuadratureError(f"alpha must lie in [0, {grid.parabolic_dim / 2}), got {alpha}")
    return SpaceTimeField(grid, _parabolic_potential(grid, w.magnitude(), grid.dim + 1 + alpha))


def fefferman_phong_ratio(f: SpaceTimeField, g: SpaceTimeField, beta: float, p: float) -> Optional[float]:
    """‖∫∫ (√(t-s) + |x-y|)^{β-(d+2)} |f g|‖_{L²} / (‖f‖_{L²} ‖g‖_{𝓜^{p,(d+2)/β}}).

    Returns None when the denominator vanishes.

    Raises:
        NormError: Unless 0 < β < (d+2)/2 and 2 < p < (d+2)/β.
    """
    grid = f.grid
    D = grid.parabolic_dim
    if not 0.0 < beta < D / 2.0:
        raise NormError(f"beta must lie in (0, {D / 2}), got {beta}")
    if not 2.0 < p < D / beta:
        raise NormError(f"p must lie in (2, {D / beta:.4g}), got {p}")
    if f.grid != g.grid:
        raise FieldError("Fields live on different grids")
    potential = SpaceTimeField(grid, _parabolic_potential(grid, f.magnitude() * g.magnitude(), D - beta))
    denominator = f.l2_norm() * norm_morrey(g, p, D / beta).value
    if denominator <= 0:
        logger.warning("fefferman_phong_ratio: degenerate denominator, ratio undefined")
        return None
    return potential.l2_norm() / denominator
