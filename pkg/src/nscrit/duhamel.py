"""Duhamel time integrals on the ladder and the bilinear operators built from them.

Every Duhamel integral here is I(t) = ∫_0^t e^{-(t-s)λ} g(s) ds for a multiplier λ ≥ 0
(λ = |ξ|² for the heat semigroup, λ = 0 for plain time integrals). The integrand g is
interpolated linearly between ladder samples and held at g(t_0) on (0, t_0); the
exponential is integrated exactly on each panel, which keeps the recursion stable for
every |ξ|²·h.
"""

import math
from dataclasses import dataclass
from typing import Any, NamedTuple, Optional, Sequence

import numpy as np
from loguru import logger

from .fields import SpaceTimeField, restrict
from .grid import CylinderSpec, Grid, cylinder_mask, dyadic_scale
from .spectral import (
    Symbol,
    dealiased_product,
    from_spectral,
    leray_coefficients,
    outer_product_coefficients,
    sigma_abs,
    sigma_b,
    tensor_divergence_coefficients,
)
from .utils import FieldError, GridError, NormError, QuadratureError

SCHEMES = ("product-singular", "midpoint")

# Below this argument the panel weights switch to their Taylor series.
_SERIES_CUTOFF = 0.1
_SERIES_TERMS = 12


def _phi1(z: np.ndarray) -> np.ndarray:
    """(1 - e^{-z}) / z = ∫_0^1 e^{-zr} dr."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < _SERIES_CUTOFF
    zs = z[small]
    acc = np.zeros_like(zs)
    for n in range(_SERIES_TERMS):
        acc = acc + (-zs) ** n / math.factorial(n + 1)
    out[small] = acc
    zl = z[~small]
    out[~small] = -np.expm1(-zl) / zl
    return out


def _psi(z: np.ndarray) -> np.ndarray:
    """(1 - e^{-z}(1 + z)) / z² = ∫_0^1 e^{-zr} r dr."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < _SERIES_CUTOFF
    zs = z[small]
    acc = np.zeros_like(zs)
    for n in range(_SERIES_TERMS):
        acc = acc + (-zs) ** n / (math.factorial(n) * (n + 2))
    out[small] = acc
    zl = z[~small]
    out[~small] = (-np.expm1(-zl) - zl * np.exp(-zl)) / zl**2
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Time quadrature for Duhamel integrals.

    "product-singular" integrates the exponential weight exactly against the linear
    interpolant of g; "midpoint" freezes the weight at panel midpoints (a baseline for
    refinement studies). Each ladder panel is split into `nodes_per_panel` − 1 equal
    sub-panels on which g is interpolated linearly. `singularity_exponent` is the kernel
    blow-up rate (t−s)^{-1/2} the product rule resolves; solve traces report it.
    """

    scheme: str = "product-singular"
    nodes_per_panel: int = 2
    singularity_exponent: float = -0.5

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise QuadratureError(f"Unknown quadrature scheme '{self.scheme}', expected one of {SCHEMES}")
        if self.nodes_per_panel < 2:
            raise QuadratureError(f"nodes_per_panel must be at least 2, got {self.nodes_per_panel}")
        if not -1.0 < self.singularity_exponent <= 0.0:
            raise QuadratureError(f"singularity_exponent must lie in (-1, 0], got {self.singularity_exponent}")

    @property
    def sub_panels(self) -> int:
        return self.nodes_per_panel - 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "scheme": self.scheme,
            "nodes_per_panel": self.nodes_per_panel,
            "singularity_exponent": self.singularity_exponent,
        }

    def head_weight(self, lam: np.ndarray, t0: float) -> np.ndarray:
        """Weight of g(t_0) for the first panel (0, t_0), where g is held constant."""
        if self.scheme == "midpoint":
            m = self.sub_panels
            h = t0 / m
            return sum(h * np.exp(-lam * (t0 - (i + 0.5) * h)) for i in range(m))
        return t0 * _phi1(lam * t0)

    def _sub_weights(self, lam: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        z = lam * h
        decay = np.exp(-z)
        if self.scheme == "midpoint":
            w = 0.5 * h * np.exp(-z / 2.0)
            return decay, w, w
        psi = _psi(z)
        return decay, h * psi, h * (_phi1(z) - psi)

    def panel_weights(self, lam: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(decay, w_left, w_right) with I_{k+1} = decay·I_k + w_left·g_k + w_right·g_{k+1}."""
        m = self.sub_panels
        if m == 1:
            return self._sub_weights(lam, h)
        d, wl, wr = self._sub_weights(lam, h / m)
        decay = np.ones_like(d)
        w_left = np.zeros_like(d)
        w_right = np.zeros_like(d)
        # sub-node i carries g_k·(1 − i/m) + g_{k+1}·i/m
        for i in range(m):
            a, b = i / m, (i + 1) / m
            decay = d * decay
            w_left = d * w_left + wl * (1.0 - a) + wr * (1.0 - b)
            w_right = d * w_right + wl * a + wr * b
        return decay, w_left, w_right


DEFAULT_RULE = QuadratureRule()


def duhamel_coefficients(
    grid: Grid,
    g: np.ndarray,
    lam: np.ndarray,
    rule: QuadratureRule = DEFAULT_RULE,
    multiplier: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Ladder samples of ∫_0^t e^{-(t-s)λ} g(s) ds for coefficients g (c, n_time, *spectral).

    Raises:
        QuadratureError: If the result is not finite.
    """
    if g.shape[1] != grid.n_time:
        raise QuadratureError(f"Integrand has {g.shape[1]} time samples, grid has {grid.n_time}")
    lam = np.broadcast_to(np.asarray(lam, dtype=float), grid.spectral_shape)
    times = grid.times
    out = np.empty(g.shape, dtype=complex)
    current = rule.head_weight(lam, float(times[0])) * g[:, 0]
    out[:, 0] = current
    for k in range(grid.n_time - 1):
        decay, w_left, w_right = rule.panel_weights(lam, float(times[k + 1] - times[k]))
        current = decay * current + w_left * g[:, k] + w_right * g[:, k + 1]
        out[:, k + 1] = current
    if multiplier is not None:
        out *= multiplier
    if not np.all(np.isfinite(out)):
        raise QuadratureError("Duhamel integral produced non-finite values")
    return out


def heat_duhamel(grid: Grid, g: np.ndarray, rule: QuadratureRule = DEFAULT_RULE) -> np.ndarray:
    return duhamel_coefficients(grid, g, grid.wavenumber_sq, rule)


def time_integral(grid: Grid, g: np.ndarray, rule: QuadratureRule = DEFAULT_RULE) -> np.ndarray:
    """∫_0^t g(s) ds at every ladder sample."""
    return duhamel_coefficients(grid, g, np.zeros(grid.spectral_shape), rule)


def _require_scalar(*fields: SpaceTimeField) -> None:
    for f in fields:
        if not f.is_scalar:
            raise FieldError(f"Expected a scalar field, got {f.components} components")
    if any(f.grid != fields[0].grid for f in fields):
        raise FieldError("Fields live on different grids")


def _require_vector(*fields: SpaceTimeField) -> None:
    for f in fields:
        if not f.is_vector or f.grid.dim < 2:
            raise FieldError(f"Expected a vector field, got {f.components} components")
    if any(f.grid != fields[0].grid for f in fields):
        raise FieldError("Fields live on different grids")


# -- operators ----------------------------------------------------------------


def linear_force(forcing: SpaceTimeField, rule: QuadratureRule = DEFAULT_RULE) -> SpaceTimeField:
    """ℒ(F)(t) = ∫_0^t e^{(t-s)Δ} ℙ Div F(s) ds."""
    grid = forcing.grid
    if not forcing.is_tensor or grid.dim < 2:
        raise FieldError(f"Forcing must be a tensor field, got {forcing.components} components")
    g = leray_coefficients(tensor_divergence_coefficients(forcing.coefficients, grid), grid)
    return SpaceTimeField.from_coefficients(grid, heat_duhamel(grid, g, rule))


def bilinear_sigma(
    sigma: Symbol, u: SpaceTimeField, v: SpaceTimeField, rule: QuadratureRule = DEFAULT_RULE
) -> SpaceTimeField:
    """B_σ(u, v)(t) = ∫_0^t e^{(t-s)Δ} σ(D)(uv)(s) ds for scalar fields."""
    _require_scalar(u, v)
    grid = u.grid
    g = dealiased_product(u.coefficients, v.coefficients, grid)
    out = duhamel_coefficients(grid, g, grid.wavenumber_sq, rule, multiplier=sigma.multiplier(grid))
    return SpaceTimeField.from_coefficients(grid, out)


def bilinear_B(u: SpaceTimeField, v: SpaceTimeField, rule: QuadratureRule = DEFAULT_RULE) -> SpaceTimeField:
    """B(u, v) = Σ_{j,k} B_{σ_ijk}(u_j, v_k), which equals ℒ(u ⊗ v)."""
    _require_vector(u, v)
    grid = u.grid
    d = grid.dim
    products = outer_product_coefficients(u.coefficients, v.coefficients, grid)
    g = np.zeros((d, grid.n_time) + grid.spectral_shape, dtype=complex)
    for i in range(d):
        for j in range(d):
            for k in range(d):
                g[i] += sigma_b(i, j, k).multiplier(grid) * products[j * d + k]
    return SpaceTimeField.from_coefficients(grid, heat_duhamel(grid, g, rule))


class KTSplit(NamedTuple):
    w1: SpaceTimeField
    w2: SpaceTimeField
    w3: SpaceTimeField


class MorreySplit(NamedTuple):
    w4: SpaceTimeField
    w5: SpaceTimeField


def _check_time(grid: Grid, T: float) -> None:
    if not grid.t_min <= T <= grid.t_max:
        raise GridError(f"T={T} lies outside the ladder [{grid.t_min}, {grid.t_max}]")


def kt_split(
    sigma: Symbol,
    u: SpaceTimeField,
    v: SpaceTimeField,
    T: float,
    center: Sequence[float],
    rule: QuadratureRule = DEFAULT_RULE,
) -> KTSplit:
    """Split B_σ(u, v) around Q_{10T,x}.

    w1 = B_σ(u, v·𝟙_{Q^c}), w2 = σ(D) e^{tΔ} ∫_0^t u·v·𝟙_Q ds, w3 = B_σ(u, v·𝟙_Q) − w2,
    so that w1 + w2 + w3 = B_σ(u, v).
    """
    _require_scalar(u, v)
    grid = u.grid
    _check_time(grid, T)
    cylinder = CylinderSpec.q(10.0 * T, center)
    if cylinder.saturates(grid):
        logger.warning(f"Cylinder Q_(10T,x) with T={T:.3g} saturates the grid; pieces degenerate")
    inside = restrict(v, cylinder_mask(grid, cylinder))
    outside = v - inside

    w1 = bilinear_sigma(sigma, u, outside, rule)
    b_in = bilinear_sigma(sigma, u, inside, rule)

    g = dealiased_product(u.coefficients, inside.coefficients, grid)
    integral = time_integral(grid, g, rule)
    w2 = SpaceTimeField.from_coefficients(grid, integral * _decay_ladder(grid) * sigma.multiplier(grid))
    return KTSplit(w1, w2, b_in - w2)


def morrey_split(
    sigma: Symbol,
    u: SpaceTimeField,
    v: SpaceTimeField,
    T: float,
    center: Sequence[float],
    rule: QuadratureRule = DEFAULT_RULE,
) -> MorreySplit:
    """Split B_σ(u, v) by cutting u on S_{T,x}: w4 = B_σ(u·𝟙_{S^c}, v), w5 = B_σ(u·𝟙_S, v)."""
    _require_scalar(u, v)
    grid = u.grid
    _check_time(grid, T)
    cylinder = CylinderSpec.s(T, center)
    if cylinder.saturates(grid):
        logger.warning(f"Cylinder S_(T,x) with T={T:.3g} saturates the grid; pieces degenerate")
    inside = restrict(u, cylinder_mask(grid, cylinder))
    return MorreySplit(bilinear_sigma(sigma, u - inside, v, rule), bilinear_sigma(sigma, inside, v, rule))


# -- band-localized defect operators ----------------------------------------------


class BandDefect(NamedTuple):
    W: SpaceTimeField
    W_star: np.ndarray  # spatial values at τ* = 16·4^{-j}, shape (1, n, ..., n)
    j: int
    tau_star: float


class DefectBound(NamedTuple):
    value: float
    bound_ratio: Optional[float]


def _decay_ladder(grid: Grid) -> np.ndarray:
    """e^{-t_k|ξ|²} for every ladder sample, shape (1, n_time, *spectral_shape)."""
    return np.exp(-grid.times.reshape((1, -1) + (1,) * grid.dim) * grid.wavenumber_sq[None, None])


def _band_scale(v: SpaceTimeField, j: Optional[int]) -> tuple[int, np.ndarray]:
    grid = v.grid
    active = np.any(v.values[0].reshape(grid.n_time, -1) != 0, axis=1)
    scales = set(dyadic_scale(grid.times[active]).tolist())
    if len(scales) > 1:
        raise FieldError(f"v is supported on several dyadic time bands: {sorted(scales)}")
    if j is None:
        j = scales.pop() if scales else int(dyadic_scale(np.asarray([grid.t_min]))[0])
    elif scales and scales != {j}:
        raise FieldError(f"v is supported on band {scales.pop()}, not on band {j}")
    return int(j), active


def _defect_parts(
    u: SpaceTimeField, v: SpaceTimeField, rule: QuadratureRule
) -> tuple[np.ndarray, np.ndarray]:
    """Ladder samples of ∫_0^t e^{(t-s)Δ}(uv) ds and of ∫_0^t (uv) ds."""
    grid = u.grid
    g = dealiased_product(u.coefficients, v.coefficients, grid)
    return heat_duhamel(grid, g, rule), time_integral(grid, g, rule)


def band_defect(
    u: SpaceTimeField,
    v_j: SpaceTimeField,
    alpha: float,
    j: Optional[int] = None,
    rule: QuadratureRule = DEFAULT_RULE,
) -> BandDefect:
    """W(t) = |D|^{1+α} ∫_0^t (e^{(t-s)Δ} − e^{tΔ}) (u v_j)(s) ds for v_j on 4^{-j} <= t < 4^{1-j}.

    Also returns W* = |D|^α ∫_0^{τ*} (e^{(τ*-s)Δ} − e^{τ*Δ}) (u v_j)(s) ds with τ* = 16·4^{-j};
    past τ*, W(t) = |D| e^{(t-τ*)Δ} W*. The band j is read off the support of v_j when
    not given.

    Raises:
        FieldError: If v_j is not supported on a single band (or not on band j).
        QuadratureError: If alpha is outside [0, 1) or the ladder cannot reach τ*.
    """
    _require_scalar(u, v_j)
    if not 0.0 <= alpha < 1.0:
        raise QuadratureError(f"alpha must lie in [0, 1), got {alpha}")
    grid = u.grid
    j, active = _band_scale(v_j, j)
    tau_star = 16.0 * 4.0 ** (-j)

    heat_part, plain = _defect_parts(u, v_j, rule)
    k = grid.wavenumber
    k2 = grid.wavenumber_sq
    with np.errstate(divide="ignore"):
        outer = np.where(k > 0, k ** (1.0 + alpha), 0.0)
        inner = np.where(k > 0, k**alpha, 1.0 if alpha == 0 else 0.0)
    W = SpaceTimeField.from_coefficients(grid, outer * (heat_part - _decay_ladder(grid) * plain))

    # Past the band g vanishes, so the state at the first sample after it determines W*.
    K = 0
    if np.any(active):
        K = min(int(np.flatnonzero(active)[-1]) + 1, grid.n_time - 1)
        if grid.times[K] > tau_star:
            raise QuadratureError("The ladder is too coarse to resolve 16·4^-j after the band")
    t_K = float(grid.times[K])
    star = inner * (np.exp(-(tau_star - t_K) * k2) * heat_part[:, K] - np.exp(-tau_star * k2) * plain[:, K])
    return BandDefect(W, from_spectral(star, grid), j, tau_star)


def defect_field(u: SpaceTimeField, v: SpaceTimeField, rule: QuadratureRule = DEFAULT_RULE) -> SpaceTimeField:
    """U(t) = |D| ∫_0^t (e^{(t-s)Δ} − e^{tΔ}) (uv)(s) ds."""
    _require_scalar(u, v)
    grid = u.grid
    heat_part, plain = _defect_parts(u, v, rule)
    return SpaceTimeField.from_coefficients(
        grid, sigma_abs().multiplier(grid) * (heat_part - _decay_ladder(grid) * plain)
    )


def defect_bands(
    u: SpaceTimeField, v: SpaceTimeField, rule: QuadratureRule = DEFAULT_RULE
) -> list[tuple[int, SpaceTimeField]]:
    """The pieces U_j = W(u, v·𝟙_{band j}) with α = 0; they sum to U."""
    _require_scalar(u, v)
    grid = u.grid
    scales = dyadic_scale(grid.times)
    pieces = []
    for j in np.unique(scales):
        band = np.zeros(grid.sample_shape, dtype=bool)
        band[scales == j] = True
        pieces.append((int(j), band_defect(u, restrict(v, band), 0.0, int(j), rule).W))
    return pieces


def defect_bound(
    u: SpaceTimeField, v: SpaceTimeField, q: float, rule: QuadratureRule = DEFAULT_RULE
) -> DefectBound:
    """‖U‖_{L²L²} and its ratio to ‖v‖_{L²L²} times the Morrey branch of ‖u‖_{YKT,q}.

    The ratio is None when the denominator vanishes.

    Raises:
        NormError: If q does not exceed the parabolic dimension.
    """
    from .norms import yktq_morrey_branch

    grid = u.grid
    if q <= grid.parabolic_dim:
        raise NormError(f"q must exceed the parabolic dimension {grid.parabolic_dim}, got {q}")
    value = defect_field(u, v, rule).l2_norm()
    denominator = v.l2_norm() * yktq_morrey_branch(u, q).value
    if denominator <= 0:
        logger.warning("defect_bound: degenerate denominator, ratio undefined")
        return DefectBound(value, None)
    return DefectBound(value, value / denominator)
