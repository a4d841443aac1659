"""Picard iteration for the mild formulation u = e^{tΔ}u0 + ℒ(F) − B(u, u)."""

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from loguru import logger

from .config import SOLVER_SPACES
from .duhamel import DEFAULT_RULE, QuadratureRule, bilinear_B, linear_force
from .fields import SpaceTimeField, SpatialField
from .grid import Grid
from .norms import norm_L2A, norm_morrey, norm_Y2, norm_YKT, norm_YKTq
from .spectral import heat_extension, max_divergence
from .utils import FieldError, SolverError

# Relative divergence tolerated in the initial data.
DIVERGENCE_TOL = 1e-8
# Increments below this multiple of machine precision (relative to the data) are rounding noise.
NOISE_FLOOR = 1e3 * np.finfo(float).eps
GROWTH_STREAK = 3


@dataclass
class ProblemData:
    """Initial velocity, forcing and the adapted space the iteration is measured in.

    `forcing_split` = (F1, F2) routes F2 through the Morrey summand of the sum space.
    """

    u0: SpatialField
    forcing: Optional[SpaceTimeField] = None
    forcing_split: Optional[tuple[SpaceTimeField, SpaceTimeField]] = None
    space: str = "ykt"
    p: float = 3.0
    q: float = 8.0

    def __post_init__(self) -> None:
        grid = self.u0.grid
        if grid.dim < 2 or not self.u0.is_vector:
            raise SolverError("Initial data must be a vector field on a grid with dim >= 2")
        if max_divergence(self.u0) > DIVERGENCE_TOL:
            raise SolverError(f"Initial data is not divergence-free (relative {max_divergence(self.u0):.2e})")
        if self.space not in SOLVER_SPACES:
            raise SolverError(f"Unknown space '{self.space}', expected one of {SOLVER_SPACES}")
        if self.forcing is not None and self.forcing_split is not None:
            raise SolverError("Give either a forcing or a split forcing, not both")
        for f in self._forcings():
            if f.grid != grid:
                raise SolverError("Forcing and initial data live on different grids")
            if not f.is_tensor:
                raise SolverError(f"Forcing must be a tensor field, got {f.components} components")

    def _forcings(self) -> list[SpaceTimeField]:
        if self.forcing is not None:
            return [self.forcing]
        return list(self.forcing_split) if self.forcing_split is not None else []

    @property
    def grid(self) -> Grid:
        return self.u0.grid

    def total_forcing(self) -> Optional[SpaceTimeField]:
        forcings = self._forcings()
        if not forcings:
            return None
        total = forcings[0]
        for f in forcings[1:]:
            total = total + f
        return total


@dataclass
class SolutionTrace:
    """Outcome of a Picard run; `solution` is the last iterate."""

    solution: SpaceTimeField
    iterations: int
    increments: list[float]
    l2_increments: list[float]
    converged: bool
    diverged: bool
    c0: float
    data_norm: float
    margin: float
    solution_norm: float
    bound_holds: bool
    decay_holds: bool
    certified: bool
    space: str
    parts: dict[str, float] = field(default_factory=dict)
    quadrature: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "space": self.space,
            "iterations": self.iterations,
            "converged": self.converged,
            "diverged": self.diverged,
            "certified": self.certified,
            "c0": self.c0,
            "data_norm": self.data_norm,
            "margin": self.margin,
            "solution_norm": self.solution_norm,
            "bound_holds": self.bound_holds,
            "decay_holds": self.decay_holds,
            "increments": self.increments,
            "l2_increments": self.l2_increments,
            "parts": dict(self.parts),
            "quadrature": dict(self.quadrature),
        }


def space_norm(u: SpaceTimeField, space: str, p: float = 3.0, q: float = 8.0) -> float:
    """The norm the iteration is measured in; 'sum' uses the YKT,q summand."""
    if space == "y2":
        return norm_Y2(u).value
    if space == "ykt":
        return norm_YKT(u).value
    if space in ("yktq", "sum"):
        return norm_YKTq(u, q).value
    if space == "morrey":
        return norm_morrey(u, p).value
    if space == "l2a":
        return norm_L2A(u).value
    raise SolverError(f"Unknown space '{space}'")


def _data_parts(data: ProblemData, rule: QuadratureRule) -> tuple[SpaceTimeField, dict[str, float], Optional[SpaceTimeField]]:
    """(e^{tΔ}u0 + ℒ(F), norm parts of the data, ℒ(F2) when the forcing is split)."""
    grid = data.grid
    free = heat_extension(data.u0)
    parts = {"free": space_norm(free, data.space, data.p, data.q)}
    base = free
    morrey_part = None
    if data.forcing is not None:
        lin = linear_force(data.forcing, rule)
        parts["forcing"] = space_norm(lin, data.space, data.p, data.q)
        base = base + lin
    elif data.forcing_split is not None:
        lin1 = linear_force(data.forcing_split[0], rule)
        lin2 = linear_force(data.forcing_split[1], rule)
        parts["forcing_yktq"] = norm_YKTq(lin1, data.q).value
        second_space = "morrey" if data.space == "sum" else data.space
        parts["forcing_" + second_space] = space_norm(lin2, second_space, data.p, data.q)
        base = base + lin1 + lin2
        morrey_part = lin2
    if base.grid != grid:
        raise FieldError("Data terms live on different grids")
    return base, parts, morrey_part


def smallness_margin(data: ProblemData, c0: float, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """4·C0·(‖e^{tΔ}u0‖ + ‖ℒ(F)‖); with a split forcing the F2 term is measured in its own summand."""
    if not c0 > 0:
        raise SolverError(f"c0 must be positive, got {c0}")
    _, parts, _ = _data_parts(data, rule)
    return 4.0 * c0 * sum(parts.values())


def solution_norm(u: SpaceTimeField, data: ProblemData, morrey_part: Optional[SpaceTimeField]) -> float:
    """‖u‖ in the adapted space; for 'sum' the decomposition u = (u − ℒ(F2)) + ℒ(F2) is used."""
    if data.space == "sum" and morrey_part is not None:
        return norm_YKTq(u - morrey_part, data.q).value + norm_morrey(morrey_part, data.p).value
    return space_norm(u, data.space, data.p, data.q)


def picard_solve(
    data: ProblemData,
    max_iter: int = 50,
    tol: float = 1e-10,
    c0: Optional[float] = None,
    rule: QuadratureRule = DEFAULT_RULE,
    c0_safety: float = 2.0,
) -> SolutionTrace:
    """Iterate u^{n+1} = u^0 − B(u^n, u^n) from u^0 = e^{tΔ}u0 + ℒ(F).

    Stops once the relative L²L² increment drops to `tol`, or after GROWTH_STREAK
    consecutive growing increments (divergence). Without `c0` the bilinear constant is
    estimated from a random ensemble and inflated by `c0_safety`.

    Returns:
        SolutionTrace with the last iterate and the certification flags.

    Raises:
        SolverError: On invalid parameters.
    """
    if max_iter < 1 or not tol > 0:
        raise SolverError("max_iter must be >= 1 and tol > 0")
    grid = data.grid
    if c0 is None:
        from .estimates import estimate_bilinear_constant

        report = estimate_bilinear_constant(grid, space=data.space, p=data.p, q=data.q, rule=rule)
        c0 = c0_safety * max(report.max, np.finfo(float).tiny)
        logger.info(f"Estimated bilinear constant {report.max:.4g}, using C0 = {c0:.4g}")
    if not c0 > 0:
        raise SolverError(f"c0 must be positive, got {c0}")

    base, parts, morrey_part = _data_parts(data, rule)
    data_norm = sum(parts.values())
    margin = 4.0 * c0 * data_norm
    scale = base.l2_norm() or 1.0
    logger.info(f"Picard start: space={data.space}, ‖data‖={data_norm:.4e}, margin={margin:.4f}")

    u = base
    increments: list[float] = []
    l2_increments: list[float] = []
    converged = diverged = False
    iterations = 0
    for n in range(max_iter):
        nxt = base - bilinear_B(u, u, rule)
        diff = nxt - u
        u = nxt
        iterations = n + 1
        l2 = diff.l2_norm() / scale
        l2_increments.append(l2)
        increments.append(space_norm(diff, "yktq" if data.space == "sum" else data.space, data.p, data.q))
        logger.debug(f"iteration {iterations}: L2 increment {l2:.3e}, space increment {increments[-1]:.3e}")
        if not math.isfinite(l2):
            diverged = True
            break
        if l2 <= tol:
            converged = True
            break
        recent = l2_increments[-(GROWTH_STREAK + 1) :]
        if len(recent) == GROWTH_STREAK + 1 and all(b > a for a, b in zip(recent, recent[1:])):
            diverged = True
            break

    floor = NOISE_FLOOR * max(data_norm, 1.0)
    decay_holds = all(
        b <= margin * a + floor for a, b in zip(increments, increments[1:]) if a > floor and b > floor
    )
    final_norm = solution_norm(u, data, morrey_part)
    bound_holds = final_norm <= 2.0 * data_norm * (1.0 + 1e-9) + floor
    certified = converged and margin < 1.0 and decay_holds and bound_holds
    if diverged:
        logger.warning(f"Picard iteration diverged after {iterations} steps")
    elif not converged:
        logger.warning(f"Picard iteration did not reach tol={tol:.1e} in {max_iter} steps")
    logger.info(f"Picard done: {iterations} iterations, certified={certified}")
    return SolutionTrace(
        solution=u,
        iterations=iterations,
        increments=increments,
        l2_increments=l2_increments,
        converged=converged,
        diverged=diverged,
        c0=float(c0),
        data_norm=data_norm,
        margin=margin,
        solution_norm=final_norm,
        bound_holds=bound_holds,
        decay_holds=decay_holds,
        certified=certified,
        space=data.space,
        parts=parts,
        quadrature=rule.to_dict(),
    )


def residual(data: ProblemData, u: SpaceTimeField, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """‖u − e^{tΔ}u0 − ℒ(F) + B(u, u)‖_{L²L²} / ‖u‖_{L²L²} (unnormalized when u = 0)."""
    base, _, _ = _data_parts(data, rule)
    r = (u - base + bilinear_B(u, u, rule)).l2_norm()
    size = u.l2_norm()
    return r / size if size > 0 else r
