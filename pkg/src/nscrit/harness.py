"""Counterexample experiments: truncations of divergent positive quantities and their growth fits.

Each case sweeps one parameter (concentration n, window R, cutoff δ, width ε), measures a
finite truncation per sweep point and fits the predicted growth model with a linear
regression. Divergence is reported as a trend; the fitted slope is the checkable claim.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
from loguru import logger
from scipy import integrate, special, stats

from .duhamel import duhamel_coefficients
from .fields import SpatialField
from .grid import Grid, make_grid
from .spectral import dealiased_product, from_spectral, hilbert_1d
from .utils import ConfigError

# Grid sizes per preset; "coarse" keeps every case to seconds.
GRID_PRESETS: dict[str, dict[str, int]] = {
    "desk": {"y2_n_space": 512, "hilbert_points": 16, "ykt_n_space": 64, "ykt_n_time": 24},
    "coarse": {"y2_n_space": 256, "hilbert_points": 16, "ykt_n_space": 32, "ykt_n_time": 16},
}

DEFAULT_SWEEPS: dict[str, list[float]] = {
    "y2-unbounded": [4, 8, 16, 32, 64],
    "hilbert-l1": [2, 4, 8, 16, 32],
    "kt-blowup": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
    "multiplier-gap": [1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
    "ykt-obstruction": [0.25, 0.1, 0.04],
}


@dataclass
class ExperimentConfig:
    """One counterexample run: case id, sweep values, grid preset and output path."""

    case: str
    sweep: list[float] = field(default_factory=list)
    grid_preset: str = "desk"
    output: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.case not in DEFAULT_SWEEPS:
            raise ConfigError(f"Unknown case '{self.case}', expected one of {tuple(DEFAULT_SWEEPS)}")
        if self.grid_preset not in GRID_PRESETS:
            raise ConfigError(f"Unknown grid preset '{self.grid_preset}', expected one of {tuple(GRID_PRESETS)}")
        if not self.sweep:
            self.sweep = list(DEFAULT_SWEEPS[self.case])
        values = np.asarray(self.sweep, dtype=float)
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise ConfigError("Sweep values must be positive and finite")
        steps = np.diff(values)
        if values.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigError("Sweep values must be strictly monotone")


@dataclass
class TrendReport:
    """Measured truncations along a sweep and the fitted growth model."""

    case: str
    sweep: list[float]
    measured: list[float]
    model: str
    slope: float
    intercept: float
    r_squared: float
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "case": self.case,
            "sweep": self.sweep,
            "measured": self.measured,
            "model": self.model,
            "fit": {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared},
            "extra": self.extra,
        }

    def csv_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.sweep, self.measured, strict=True))


def fit_trend(
    case: str, sweep: Sequence[float], measured: Sequence[float], model: str, x: Sequence[float], **extra: Any
) -> TrendReport:
    """Least-squares fit measured ≈ slope·x + intercept; a single point fits exactly."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(measured, dtype=float)
    if xs.size >= 2:
        fit = stats.linregress(xs, ys)
        slope, intercept, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue**2)
    else:
        slope, intercept, r2 = 0.0, float(ys[0]) if ys.size else 0.0, 1.0
    logger.info(f"{case}: fit {model} slope={slope:.4g} intercept={intercept:.4g} R²={r2:.5f}")
    return TrendReport(case, [float(s) for s in sweep], [float(m) for m in measured], model, slope, intercept, r2, dict(extra))


def _dummy_ladder_grid(dim: int, box_length: float, n_space: int) -> Grid:
    return make_grid(dim, box_length, n_space, 0.01, 1.0, 2)


# -- inverse half-Laplacian mass in 2D ------------------------------------------------------


def inverse_half_laplacian_mass(n: float, box_length: float = 4.0, n_space: int = 512) -> float:
    """‖(−Δ)^{-1/2} φ_n‖² on the unit window (−1, 1)² around the box center.

    φ_n(x) = (n²/π) e^{-n²|x|²} has ‖φ_n‖₁ = 1 and Fourier transform e^{-|ξ|²/(4n²)}; its
    periodized Fourier-series coefficients are sampled exactly.
    """
    grid = _dummy_ladder_grid(2, box_length, n_space)
    center = box_length / 2.0
    xi = grid.wavevectors
    k = grid.wavenumber
    phase = np.exp(-1j * center * (xi[0] + xi[1]))
    with np.errstate(divide="ignore"):
        symbol = np.where(k > 0, np.exp(-(k**2) / (4.0 * n * n)) / k, 0.0)
    coefficients = symbol * phase * grid.n_space_points / box_length**2
    values = from_spectral(coefficients, grid)
    axis = np.abs(grid.axis - center) < 1.0
    window = axis[:, None] & axis[None, :]
    return float(np.sum(values[window] ** 2) * grid.cell_volume)


def radial_half_laplacian_mass(n: float) -> float:
    """The same mass on ℝ²: f_n(r) = n/(2√π)·I0e(n²r²/2), integrated over the square by symmetry."""

    def f2r(r: float) -> float:
        value = n / (2.0 * math.sqrt(math.pi)) * special.i0e(n * n * r * r / 2.0)
        return value * value * r

    def inner(theta: float) -> float:
        upper = 1.0 / math.cos(theta)
        return integrate.quad(f2r, 0.0, upper, points=[min(1.0 / n, upper / 2)], limit=200)[0]

    return 8.0 * integrate.quad(inner, 0.0, math.pi / 4.0, limit=200)[0]


def cx_y2_unbounded(
    n_list: Sequence[float], box_length: float = 4.0, n_space: int = 512, method: str = "spectral"
) -> TrendReport:
    """Log growth of the inverse half-Laplacian mass of concentrating mollifiers, fit against ln n."""
    if method == "spectral":
        measured = [inverse_half_laplacian_mass(n, box_length, n_space) for n in n_list]
    elif method == "radial":
        measured = [radial_half_laplacian_mass(n) for n in n_list]
    else:
        raise ConfigError(f"Unknown method '{method}', expected 'spectral' or 'radial'")
    return fit_trend(
        "y2-unbounded",
        n_list,
        measured,
        "c·ln n",
        np.log(n_list),
        method=method,
        box_length=box_length,
        n_space=n_space,
        predicted_slope=1.0 / (2.0 * math.pi),
    )


# -- Hilbert transform on L¹ ------------------------------------------------------------------


def bump_profile(s: np.ndarray) -> np.ndarray:
    """exp(−1/(1−s²)) on |s| < 1, zero elsewhere: smooth, even, positive integral."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def hilbert_window_mass(R: float, points_per_unit: int = 16) -> tuple[float, float]:
    """(∫_{−R}^{R} |H(φ̂)|, ‖φ̂‖₁) on a periodic line of length 8R."""
    period = 8.0 * R
    n_space = 1 << max(2, math.ceil(math.log2(period * points_per_unit)))
    grid = _dummy_ladder_grid(1, period, n_space)
    s = (grid.axis + period / 2.0) % period - period / 2.0
    profile = SpatialField(grid, bump_profile(s))
    transformed = np.abs(hilbert_1d(profile).values[0])
    window = np.abs(s) <= R
    return float(np.sum(transformed[window]) * grid.dx), float(np.sum(np.abs(profile.values[0])) * grid.dx)


def cx_hilbert_L1(R_list: Sequence[float], points_per_unit: int = 16) -> TrendReport:
    """Log growth of ∫_{−R}^{R}|H(φ̂)| for an even bump with nonzero integral."""
    pairs = [hilbert_window_mass(R, points_per_unit) for R in R_list]
    return fit_trend(
        "hilbert-l1",
        R_list,
        [p[0] for p in pairs],
        "c·ln R",
        np.log(R_list),
        profile_l1=[p[1] for p in pairs],
        points_per_unit=points_per_unit,
    )


# -- truncated blow-up integral ---------------------------------------------------------------


def _blowup_regular(s: float) -> float:
    """|s − 1/2|^{3/4} / ((1−s)|ln(2−2s)|^{3/4}), continuous through s = 1/2 (limit 2^{1/4})."""
    gap = abs(s - 0.5)
    if gap < 1e-12:
        return 2.0 ** 0.25
    return (gap / abs(math.log(2.0 - 2.0 * s))) ** 0.75 / (1.0 - s)


def blowup_integral(delta: float, epsrel: float = 1e-12) -> float:
    """∫_0^{1−δ} ds / ((1−s)|ln(2−2s)|^{3/4}).

    The panels around the singularity at s = 1/2 use the algebraic weight |s − 1/2|^{-3/4};
    the tail [3/4, 1−δ] is taken in u = −ln(1−s), where the integrand is (u − ln 2)^{-3/4}.
    """
    if not 0.0 < delta < 0.25:
        raise ConfigError(f"delta must lie in (0, 1/4), got {delta}")
    opts: dict[str, Any] = {"epsabs": 0.0, "epsrel": epsrel, "limit": 500}
    left = integrate.quad(_blowup_regular, 0.0, 0.5, weight="alg", wvar=(0.0, -0.75), **opts)[0]
    middle = integrate.quad(_blowup_regular, 0.5, 0.75, weight="alg", wvar=(-0.75, 0.0), **opts)[0]
    tail = integrate.quad(
        lambda u: (u - math.log(2.0)) ** -0.75, math.log(4.0), math.log(1.0 / delta), **opts
    )[0]
    return left + middle + tail


def blowup_closed_form(delta: float) -> float:
    return 4.0 * math.log(1.0 / (2.0 * delta)) ** 0.25 + 4.0 * math.log(2.0) ** 0.25


def cx_kt_blowup(delta_list: Sequence[float]) -> TrendReport:
    """Growth of the truncated integral against (ln(1/(2δ)))^{1/4}; the predicted slope is 4."""
    measured = [blowup_integral(d) for d in delta_list]
    coarse = [blowup_integral(d, epsrel=1e-10) for d in delta_list]
    refinement = [abs(a - b) / a for a, b in zip(measured, coarse, strict=True)]
    return fit_trend(
        "kt-blowup",
        delta_list,
        measured,
        "c·(ln(1/(2δ)))^{1/4}",
        [math.log(1.0 / (2.0 * d)) ** 0.25 for d in delta_list],
        closed_form=[blowup_closed_form(d) for d in delta_list],
        refinement=refinement,
    )


# -- multiplier gap -------------------------------------------------------------------------------


def _raw_theta(sigma: float) -> float:
    if not 0.0 < sigma < 1.0:
        return 0.0
    return math.exp(-1.0 / (sigma * (1.0 - sigma)))


_THETA_NORM = math.sqrt(integrate.quad(lambda s: _raw_theta(s) ** 2, 0.0, 1.0, epsabs=0.0, epsrel=1e-13)[0])


def theta_sq(sigma: float) -> float:
    """θ² for the bump θ normalized to ‖θ‖₂ = 1 on (0, 1)."""
    return (_raw_theta(sigma) / _THETA_NORM) ** 2


def _inner_potential(t: float, eps: float, epsrel: float) -> float:
    """h(t) = ∫_0^t (t−s)^{-1/2} ω_ε(s)² ds with ω_ε = ε^{-1/2} θ(·/ε)."""
    if t <= eps:
        # σ = s/ε: ε^{-1/2} ∫_0^{t/ε} (t/ε − σ)^{-1/2} θ²(σ) dσ
        value = integrate.quad(theta_sq, 0.0, t / eps, weight="alg", wvar=(0.0, -0.5), epsrel=epsrel, limit=200)[0]
        return value / math.sqrt(eps)
    return integrate.quad(lambda s: theta_sq(s) / math.sqrt(t - eps * s), 0.0, 1.0, epsrel=epsrel, limit=200)[0]


def gap_integral(eps: float, epsrel: float = 1e-9) -> float:
    """J(ε) = ∫_0^1 h(t)² dt, split at t = ε and taken in log-time beyond it."""
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"epsilon must lie in (0, 1), got {eps}")
    head = integrate.quad(lambda t: _inner_potential(t, eps, epsrel) ** 2, 0.0, eps, epsrel=epsrel, limit=200)[0]
    tail = integrate.quad(
        lambda y: _inner_potential(math.exp(y), eps, epsrel) ** 2 * math.exp(y),
        math.log(eps),
        0.0,
        epsrel=epsrel,
        limit=200,
    )[0]
    return head + tail


def profile_l2(eps: float) -> float:
    """‖ω_ε‖₂, which the scaling keeps at 1."""
    return math.sqrt(integrate.quad(lambda s: theta_sq(s / eps) / eps, 0.0, eps, epsrel=1e-12)[0])


def cx_multiplier_gap(eps_list: Sequence[float]) -> TrendReport:
    """Log growth of J(ε) against ln(1/ε)."""
    measured = [gap_integral(e) for e in eps_list]
    coarse = [gap_integral(e, epsrel=1e-7) for e in eps_list]
    return fit_trend(
        "multiplier-gap",
        eps_list,
        measured,
        "c·ln(1/ε)",
        [math.log(1.0 / e) for e in eps_list],
        profile_l2=[profile_l2(e) for e in eps_list],
        refinement=[abs(a - b) / a for a, b in zip(measured, coarse, strict=True)],
    )


# -- Koch–Tataru target obstruction --------------------------------------------------------------


def _radial_bump(r: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Smooth nonnegative bump supported on lo < r < hi (a ball when lo = 0)."""
    out = np.zeros_like(r)
    if lo == 0.0:
        inside = r < hi
        out[inside] = np.exp(-1.0 / (1.0 - (r[inside] / hi) ** 2))
        return out
    mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
    inside = np.abs(r - mid) < half
    out[inside] = np.exp(-1.0 / (1.0 - ((r[inside] - mid) / half) ** 2))
    return out


def _radial_l1(lo: float, hi: float) -> float:
    """∫_{ℝ³} of the radial bump, for the ‖·‖₁ = 1 normalization."""
    return integrate.quad(lambda r: 4.0 * math.pi * r * r * _radial_bump(np.asarray([r]), lo, hi)[0], lo, hi, limit=200)[0]


def obstruction_grid(delta_min: float, n_space: int, n_time: int) -> Grid:
    """3D grid on [0, 2π)³ with a ladder clustering at t = 1 and ending at 1 − δ_min/2."""
    return make_grid(3, 2.0 * math.pi, n_space, 0.05, 1.0 - delta_min / 2.0, n_time, "clustered", 1.0)


def cx_ykt_obstruction(deltas: Sequence[float], n_space: int = 64, n_time: int = 24) -> TrendReport:
    """√t‖B_{σ0}(u, v)(1)‖_∞ for u, v built from profiles shrinking like √(1−t), with v cut at 1 − δ.

    u(t) = φ(·/ε), v(t) = ψ(·/ε) / (ε |ln(2ε²)|^{3/4}) with ε = √(1−t); φ̂ is a bump on the unit
    ball and ψ̂ a bump on the annulus 2 < |ξ| < 4, both with ‖·‖₁ = 1 and nonnegative.
    """
    if any(not 0.0 < d < 1.0 for d in deltas):
        raise ConfigError("cutoffs must lie in (0, 1)")
    grid = obstruction_grid(min(deltas), n_space, n_time)
    k = grid.wavenumber
    phi_norm = _radial_l1(0.0, 1.0)
    psi_norm = _radial_l1(2.0, 4.0)
    volume = grid.box_length**3
    scale = grid.n_space_points / volume

    u_coeffs = np.empty((1, grid.n_time) + grid.spectral_shape, dtype=complex)
    v_coeffs = np.empty_like(u_coeffs)
    for i, t in enumerate(grid.times):
        eps = math.sqrt(1.0 - t)
        weight = 1.0 / (eps * max(abs(math.log(2.0 * eps * eps)), 1e-12) ** 0.75)
        u_coeffs[0, i] = eps**3 * _radial_bump(eps * k, 0.0, 1.0) / phi_norm * scale
        v_coeffs[0, i] = weight * eps**3 * _radial_bump(eps * k, 2.0, 4.0) / psi_norm * scale

    product = dealiased_product(u_coeffs, v_coeffs, grid)
    measured, positive = [], []
    for delta in deltas:
        cut = (grid.times <= 1.0 - delta).reshape((1, -1) + (1,) * grid.dim)
        evolved = duhamel_coefficients(grid, product * cut, grid.wavenumber_sq, multiplier=k)[0, -1]
        at_one = evolved * np.exp(-(1.0 - grid.times[-1]) * grid.wavenumber_sq)
        peak = float(np.abs(at_one).max())
        positive.append(bool(np.all(at_one.real >= -1e-10 * peak) and np.all(np.abs(at_one.imag) <= 1e-10 * peak)))
        measured.append(float(from_spectral(at_one, grid).max()))
    return fit_trend(
        "ykt-obstruction",
        deltas,
        measured,
        "c·(ln(1/(2δ)))^{1/4}",
        [math.log(1.0 / (2.0 * d)) ** 0.25 for d in deltas],
        fourier_positive=positive,
        n_space=n_space,
        n_time=n_time,
    )


# -- dispatch ---------------------------------------------------------------------------------


def run_case(config: ExperimentConfig) -> TrendReport:
    """Run the experiment named by `config.case` on its preset."""
    preset = GRID_PRESETS[config.grid_preset]
    sweep = list(config.sweep)
    logger.info(f"Running case {config.case} over {sweep} (preset {config.grid_preset})")
    runners: dict[str, Callable[[], TrendReport]] = {
        "y2-unbounded": lambda: cx_y2_unbounded(sweep, n_space=preset["y2_n_space"]),
        "hilbert-l1": lambda: cx_hilbert_L1(sweep, preset["hilbert_points"]),
        "kt-blowup": lambda: cx_kt_blowup(sweep),
        "multiplier-gap": lambda: cx_multiplier_gap(sweep),
        "ykt-obstruction": lambda: cx_ykt_obstruction(sweep, preset["ykt_n_space"], preset["ykt_n_time"]),
    }
    return runners[config.case]()
