"""Ensemble estimates of the constants in the bilinear and potential inequalities.

Each estimate draws a seeded ensemble of random fields, evaluates a ratio per sample and
summarizes mean and max with the worst sample as witness. Degenerate samples (vanishing
denominators) are counted and skipped.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from loguru import logger

from .duhamel import (
    DEFAULT_RULE,
    QuadratureRule,
    band_defect,
    bilinear_B,
    bilinear_sigma,
    defect_bound,
    kt_split,
    morrey_split,
)
from .fields import SpaceTimeField, restrict
from .grid import CylinderSpec, Grid, cylinder_mask, dyadic_partition, dyadic_scale
from .norms import norm_L2A, norm_L2wLinf, norm_morrey, norm_Y2, norm_YKT, norm_YKTq
from .potentials import fefferman_phong_ratio, kernel_domination_residual
from .presets import random_bump, random_heat_like
from .spectral import Symbol, get_symbol
from .utils import ConfigError

SampleHook = Optional[Callable[[], None]]


@dataclass
class EstimateReport:
    """Summary of one ratio over an ensemble."""

    operator: str
    ensemble_size: int
    grid: dict[str, Any]
    per_sample: list[float]
    witness: dict[str, Any] = field(default_factory=dict)
    parameters: dict[str, Any] = field(default_factory=dict)
    degenerate: int = 0

    @property
    def max(self) -> float:
        return max(self.per_sample) if self.per_sample else 0.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_sample)) if self.per_sample else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "operator": self.operator,
            "ensemble_size": self.ensemble_size,
            "grid": self.grid,
            "constants": {"mean": self.mean, "max": self.max, "per_sample": self.per_sample},
            "degenerate": self.degenerate,
            "witness": self.witness,
            "parameters": self.parameters,
        }


def _summarize(
    operator: str,
    grid: Grid,
    seed: int,
    samples: list[Optional[float]],
    parameters: dict[str, Any],
    details: Optional[list[dict[str, Any]]] = None,
) -> EstimateReport:
    kept = [(i, float(s)) for i, s in enumerate(samples) if s is not None and math.isfinite(s)]
    degenerate = len(samples) - len(kept)
    if degenerate:
        logger.warning(f"{operator}: {degenerate} degenerate samples skipped")
    witness: dict[str, Any] = {}
    if kept:
        index, value = max(kept, key=lambda item: item[1])
        witness = {"sample": index, "seed": seed, "value": value}
        if details:
            witness.update(details[index])
    report = EstimateReport(
        operator,
        len(samples),
        grid.to_header(),
        [value for _, value in kept],
        witness,
        {"seed": seed, **parameters},
        degenerate,
    )
    logger.info(f"{operator}: mean={report.mean:.4g} max={report.max:.4g} over {len(kept)} samples")
    return report


def _tick(on_sample: SampleHook) -> None:
    if on_sample is not None:
        on_sample()


def _ratio(num: float, den: float) -> Optional[float]:
    return num / den if den > 0 else None


def _default_T(grid: Grid) -> float:
    return float(np.sqrt(grid.t_min * grid.t_max))


# -- estimates -----------------------------------------------------------------------


def estimate_kernel_domination(
    grid: Grid, sigma: Symbol, ensemble_size: int = 8, seed: int = 0, on_sample: SampleHook = None
) -> EstimateReport:
    """C_emp of |σ(D)e^{τΔ}(uv)| <= C (√τ + |·|)^{-(d+1)} * |uv| over random bumps."""
    rng = np.random.default_rng(seed)
    samples: list[Optional[float]] = []
    details = []
    for _ in range(ensemble_size):
        result = kernel_domination_residual(sigma, random_bump(grid, rng), random_bump(grid, rng))
        samples.append(result.c_emp)
        details.append({"max_violation": result.max_violation})
        _tick(on_sample)
    return _summarize("kernel_domination", grid, seed, samples, {"sigma": sigma.name}, details)


def estimate_kt_split(
    grid: Grid,
    sigma: Symbol,
    ensemble_size: int = 8,
    seed: int = 0,
    T: Optional[float] = None,
    rule: QuadratureRule = DEFAULT_RULE,
    on_sample: SampleHook = None,
) -> list[EstimateReport]:
    """Ratios of the three pieces to ‖u‖_{YKT}‖v‖_{YKT}: L²L² over Q_{T,x} for w1 and w3,
    Y2 for w2."""
    rng = np.random.default_rng(seed)
    T = T or _default_T(grid)
    center = (grid.box_length / 2.0,) * grid.dim
    region = cylinder_mask(grid, CylinderSpec.q(T, center))
    scale = T ** (-grid.dim / 4.0)
    pieces: dict[str, list[Optional[float]]] = {"w1": [], "w2": [], "w3": []}
    for _ in range(ensemble_size):
        u = random_heat_like(grid, rng)
        v = random_heat_like(grid, rng)
        split = kt_split(sigma, u, v, T, center, rule)
        den = norm_YKT(u).value * norm_YKT(v).value
        pieces["w1"].append(_ratio(scale * restrict(split.w1, region).l2_norm(), den))
        pieces["w2"].append(_ratio(norm_Y2(split.w2).value, den))
        pieces["w3"].append(_ratio(scale * restrict(split.w3, region).l2_norm(), den))
        _tick(on_sample)
    params = {"sigma": sigma.name, "T": T, "center": list(center), "quadrature": rule.to_dict()}
    return [_summarize(f"kt_split.{name}", grid, seed, s, params) for name, s in pieces.items()]


def estimate_morrey_split(
    grid: Grid,
    sigma: Symbol,
    q: float = 8.0,
    ensemble_size: int = 8,
    seed: int = 0,
    T: Optional[float] = None,
    rule: QuadratureRule = DEFAULT_RULE,
    on_sample: SampleHook = None,
) -> list[EstimateReport]:
    """Ratios of the Morrey-split pieces to ‖u‖_{YKT,q}‖v‖_{YKT}."""
    rng = np.random.default_rng(seed)
    T = T or _default_T(grid)
    center = (grid.box_length / 2.0,) * grid.dim
    pieces: dict[str, list[Optional[float]]] = {"w4": [], "w5": []}
    for _ in range(ensemble_size):
        u = random_heat_like(grid, rng)
        v = random_heat_like(grid, rng)
        split = morrey_split(sigma, u, v, T, center, rule)
        den = norm_YKTq(u, q).value * norm_YKT(v).value
        pieces["w4"].append(_ratio(norm_Y2(split.w4).value, den))
        pieces["w5"].append(_ratio(norm_Y2(split.w5).value, den))
        _tick(on_sample)
    params = {"sigma": sigma.name, "q": q, "T": T, "quadrature": rule.to_dict()}
    return [_summarize(f"morrey_split.{name}", grid, seed, s, params) for name, s in pieces.items()]


def estimate_fefferman_phong(
    grid: Grid,
    beta: float = 1.0,
    p: float = 3.0,
    ensemble_size: int = 8,
    seed: int = 0,
    on_sample: SampleHook = None,
) -> EstimateReport:
    rng = np.random.default_rng(seed)
    samples: list[Optional[float]] = []
    for _ in range(ensemble_size):
        samples.append(fefferman_phong_ratio(random_bump(grid, rng), random_bump(grid, rng), beta, p))
        _tick(on_sample)
    return _summarize("fefferman_phong", grid, seed, samples, {"beta": beta, "p": p})


def band_cell_morrey(u: SpaceTimeField, j: int, alpha: float, top_cells: int = 4) -> float:
    """sup_k ‖𝟙_{R_{j,k}} u‖ in 𝓜̇₂^{2ρ/D, ρ} with ρ = D/(1−α).

    The Morrey norm is evaluated on the `top_cells` cells of level j with the largest
    local L^{2ρ/D} mass.
    """
    D = u.grid.parabolic_dim
    rho = D / (1.0 - alpha)
    p = 2.0 * rho / D
    cells = [index_set for cell, index_set in dyadic_partition(u.grid) if cell.j == j]
    if not cells:
        return 0.0
    density = u.magnitude().ravel() ** p
    masses = np.array([density[index_set.flat].sum() for index_set in cells])
    ranked = np.argsort(masses)[::-1][:top_cells]
    return max(norm_morrey(restrict(u, cells[i]), p, rho).value for i in ranked)


def estimate_band_defect(
    grid: Grid,
    q: float = 8.0,
    alpha: float = 0.5,
    ensemble_size: int = 8,
    seed: int = 0,
    rule: QuadratureRule = DEFAULT_RULE,
    on_sample: SampleHook = None,
    top_cells: int = 4,
) -> list[EstimateReport]:
    """‖W‖_{L²L²} / (‖v_j‖_{L²L²} · sup_k ‖u_{j,k}‖) on the most populated band, and the defect bound on U."""
    rng = np.random.default_rng(seed)
    scales = dyadic_scale(grid.times)
    j = int(np.bincount(scales - scales.min()).argmax() + scales.min())
    band = np.zeros(grid.sample_shape, dtype=bool)
    band[scales == j] = True
    w_ratios: list[Optional[float]] = []
    u_ratios: list[Optional[float]] = []
    for _ in range(ensemble_size):
        u = random_heat_like(grid, rng)
        v = random_heat_like(grid, rng)
        defect = band_defect(u, restrict(v, band), alpha, j, rule)
        den = band_cell_morrey(u, j, alpha, top_cells) * restrict(v, band).l2_norm()
        w_ratios.append(_ratio(defect.W.l2_norm(), den))
        u_ratios.append(defect_bound(u, v, q, rule).bound_ratio)
        _tick(on_sample)
    quadrature = rule.to_dict()
    return [
        _summarize(
            "band_defect.W",
            grid,
            seed,
            w_ratios,
            {"alpha": alpha, "j": j, "top_cells": top_cells, "quadrature": quadrature},
        ),
        _summarize("band_defect.U", grid, seed, u_ratios, {"q": q, "quadrature": quadrature}),
    ]


def estimate_bilinear_constant(
    grid: Grid,
    space: str = "ykt",
    ensemble_size: int = 4,
    seed: int = 0,
    p: float = 3.0,
    q: float = 8.0,
    rule: QuadratureRule = DEFAULT_RULE,
    on_sample: SampleHook = None,
) -> EstimateReport:
    """‖B(u, v)‖ / (‖u‖‖v‖) over random divergence-free heat-like fields."""
    from .solver import space_norm

    rng = np.random.default_rng(seed)
    measured = "yktq" if space == "sum" else space
    samples: list[Optional[float]] = []
    for _ in range(ensemble_size):
        u = random_heat_like(grid, rng, grid.dim, solenoidal=True)
        v = random_heat_like(grid, rng, grid.dim, solenoidal=True)
        num = space_norm(bilinear_B(u, v, rule), measured, p, q)
        samples.append(_ratio(num, space_norm(u, measured, p, q) * space_norm(v, measured, p, q)))
        _tick(on_sample)
    return _summarize("bilinear", grid, seed, samples, {"space": space, "quadrature": rule.to_dict()})


def estimate_embedding_chain(
    grid: Grid, q: float = 8.0, ensemble_size: int = 8, seed: int = 0, on_sample: SampleHook = None
) -> list[EstimateReport]:
    """Ratios along L²A → L²wL∞ → YKT,q → YKT for random heat-like fields."""
    rng = np.random.default_rng(seed)
    ratios: dict[str, list[Optional[float]]] = {"l2wlinf/l2a": [], "yktq/l2wlinf": [], "ykt/yktq": []}
    for _ in range(ensemble_size):
        u = random_heat_like(grid, rng)
        a = norm_L2A(u).value
        w = norm_L2wLinf(u).value
        kq = norm_YKTq(u, q).value
        k = norm_YKT(u).value
        ratios["l2wlinf/l2a"].append(_ratio(w, a))
        ratios["yktq/l2wlinf"].append(_ratio(kq, w))
        ratios["ykt/yktq"].append(_ratio(k, kq))
        _tick(on_sample)
    return [_summarize(f"embedding.{name}", grid, seed, s, {"q": q}) for name, s in ratios.items()]


def estimate_morrey_linf(
    grid: Grid,
    sigma: Symbol,
    p: float = 3.0,
    ensemble_size: int = 8,
    seed: int = 0,
    rule: QuadratureRule = DEFAULT_RULE,
    on_sample: SampleHook = None,
) -> EstimateReport:
    """sup √t|B_σ(u, v)| / (‖u‖_{𝓜^{p,D}} ‖v‖_{𝓜^{p,D}}) for p above half the parabolic dimension."""
    if not p > grid.parabolic_dim / 2.0:
        raise ConfigError(f"p must exceed {grid.parabolic_dim / 2}, got {p}")
    rng = np.random.default_rng(seed)
    samples: list[Optional[float]] = []
    root_t = np.sqrt(grid.times).reshape((-1,) + (1,) * grid.dim)
    for _ in range(ensemble_size):
        u = random_heat_like(grid, rng)
        v = random_heat_like(grid, rng)
        out = bilinear_sigma(sigma, u, v, rule)
        num = float(np.max(root_t * np.abs(out.values[0])))
        samples.append(_ratio(num, norm_morrey(u, p).value * norm_morrey(v, p).value))
        _tick(on_sample)
    params = {"sigma": sigma.name, "p": p, "quadrature": rule.to_dict()}
    return _summarize("morrey_linf", grid, seed, samples, params)


OPERATORS = (
    "kernel_domination",
    "kt_split",
    "morrey_split",
    "fefferman_phong",
    "band_defect",
    "bilinear",
    "embedding",
    "morrey_linf",
)


def run_estimate(
    operator: str,
    grid: Grid,
    ensemble_size: int = 8,
    seed: int = 0,
    sigma: str = "abs",
    T: Optional[float] = None,
    p: float = 3.0,
    q: float = 8.0,
    alpha: float = 0.5,
    beta: float = 1.0,
    on_sample: SampleHook = None,
    rule: QuadratureRule = DEFAULT_RULE,
) -> list[EstimateReport]:
    """Dispatch an estimate by name; multi-piece estimates return one report per piece.

    Raises:
        ConfigError: On an unknown operator.
    """
    symbol = get_symbol(sigma, grid.dim)
    if operator == "kernel_domination":
        return [estimate_kernel_domination(grid, symbol, ensemble_size, seed, on_sample=on_sample)]
    if operator == "kt_split":
        return estimate_kt_split(grid, symbol, ensemble_size, seed, T, rule, on_sample=on_sample)
    if operator == "morrey_split":
        return estimate_morrey_split(grid, symbol, q, ensemble_size, seed, T, rule, on_sample=on_sample)
    if operator == "fefferman_phong":
        return [estimate_fefferman_phong(grid, beta, p, ensemble_size, seed, on_sample=on_sample)]
    if operator == "band_defect":
        return estimate_band_defect(grid, q, alpha, ensemble_size, seed, rule, on_sample=on_sample)
    if operator == "bilinear":
        return [estimate_bilinear_constant(grid, "ykt", ensemble_size, seed, p, q, rule, on_sample=on_sample)]
    if operator == "embedding":
        return estimate_embedding_chain(grid, q, ensemble_size, seed, on_sample=on_sample)
    if operator == "morrey_linf":
        return [estimate_morrey_linf(grid, symbol, p, ensemble_size, seed, rule, on_sample=on_sample)]
    raise ConfigError(f"Unknown operator '{operator}', expected one of {OPERATORS}")

