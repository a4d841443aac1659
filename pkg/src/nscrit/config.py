"""Configuration loading and validation."""

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import yaml

from .grid import Grid, make_grid
from .utils import ConfigError

SOLVER_SPACES = ("y2", "ykt", "yktq", "morrey", "l2a", "sum")
INITIAL_PRESETS = ("zero", "shear", "taylor_green", "manufactured", "random", "file")
FORCING_PRESETS = ("none", "manufactured", "random", "file")
QUADRATURE_SCHEMES = ("product-singular", "midpoint")


@dataclass
class GridConfig:
    """Space-time grid configuration."""

    dim: int = 3
    box_length: float = 2.0 * math.pi
    n_space: int = 16
    t_min: float = 0.01
    t_max: float = 1.0
    n_time: int = 16
    spacing: str = "geometric"
    accumulation: Optional[float] = None


@dataclass
class DataConfig:
    """Initial data and forcing for the solver."""

    initial: str = "shear"
    amplitude: float = 0.01
    initial_path: Optional[str] = None
    forcing: str = "none"
    forcing_amplitude: float = 0.0
    forcing_path: Optional[str] = None
    forcing_split: bool = False  # add a localized bump forcing on the Morrey summand
    seed: int = 0


@dataclass
class SolverConfig:
    """Picard iteration configuration."""

    space: str = "ykt"
    max_iter: int = 50
    tol: float = 1e-10
    c0: Optional[float] = None  # estimated from an ensemble when unset
    c0_safety: float = 2.0
    p: float = 3.0
    q: float = 8.0
    scheme: str = "product-singular"
    nodes_per_panel: int = 2


@dataclass
class EstimateConfig:
    """Ensemble estimate configuration."""

    operator: str = "bilinear"
    ensemble_size: int = 8
    seed: int = 0
    sigma: str = "abs"
    T: Optional[float] = None
    p: float = 3.0
    q: float = 8.0
    alpha: float = 0.5
    beta: float = 1.0


@dataclass
class OutputConfig:
    """Output configuration."""

    directory: str = "output"
    write_fields: bool = True


def _section(cls: type, data: dict[str, Any], name: str) -> Any:
    raw = data.get(name) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"Section '{name}' must be a mapping, got {type(raw).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in section '{name}': {', '.join(unknown)}")
    return cls(**raw)


@dataclass
class Config:
    """Main configuration container."""

    grid: GridConfig = field(default_factory=GridConfig)
    data: DataConfig = field(default_factory=DataConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    estimate: EstimateConfig = field(default_factory=EstimateConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_file(cls, path: Path) -> "Config":
        """Load configuration from a YAML (or JSON) file.

        Args:
            path: Path to the config file.

        Returns:
            Validated Config instance.

        Raises:
            FileNotFoundError: If the config file doesn't exist.
            ConfigError: If the file cannot be parsed or holds invalid settings.
        """
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")

        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Failed to parse {path}: {e}") from e

        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a mapping")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Config":
        """Create a validated config from a dictionary of sections.

        Raises:
            ConfigError: On unknown sections or keys, or invalid values.
        """
        sections = {"grid", "data", "solver", "estimate", "output"}
        unknown = sorted(set(data) - sections)
        if unknown:
            raise ConfigError(f"Unknown config sections: {', '.join(unknown)}")

        config = cls(
            grid=_section(GridConfig, data, "grid"),
            data=_section(DataConfig, data, "data"),
            solver=_section(SolverConfig, data, "solver"),
            estimate=_section(EstimateConfig, data, "estimate"),
            output=_section(OutputConfig, data, "output"),
        )
        config.validate()
        return config

    def validate(self) -> None:
        if self.data.initial not in INITIAL_PRESETS:
            raise ConfigError(f"Unknown initial data '{self.data.initial}', expected one of {INITIAL_PRESETS}")
        if self.data.forcing not in FORCING_PRESETS:
            raise ConfigError(f"Unknown forcing '{self.data.forcing}', expected one of {FORCING_PRESETS}")
        if self.data.initial == "file" and not self.data.initial_path:
            raise ConfigError("initial: file requires data.initial_path")
        if self.data.forcing == "file" and not self.data.forcing_path:
            raise ConfigError("forcing: file requires data.forcing_path")
        if self.solver.space not in SOLVER_SPACES:
            raise ConfigError(f"Unknown solver space '{self.solver.space}', expected one of {SOLVER_SPACES}")
        if self.solver.scheme not in QUADRATURE_SCHEMES:
            raise ConfigError(f"Unknown quadrature scheme '{self.solver.scheme}'")
        if self.solver.nodes_per_panel < 2:
            raise ConfigError("solver.nodes_per_panel must be at least 2")
        if self.solver.max_iter < 1:
            raise ConfigError("solver.max_iter must be at least 1")
        if not self.solver.tol > 0:
            raise ConfigError("solver.tol must be positive")
        if self.solver.c0 is not None and not self.solver.c0 > 0:
            raise ConfigError("solver.c0 must be positive")
        if self.estimate.ensemble_size < 1:
            raise ConfigError("estimate.ensemble_size must be at least 1")

    def make_grid(self) -> Grid:
        """Build the grid described by the `grid` section.

        Raises:
            GridError: If the grid parameters are invalid.
        """
        g = self.grid
        return make_grid(g.dim, g.box_length, g.n_space, g.t_min, g.t_max, g.n_time, g.spacing, g.accumulation)

    def to_dict(self) -> dict[str, Any]:
        """Convert config to a dictionary of sections."""
        return {
            "grid": asdict(self.grid),
            "data": asdict(self.data),
            "solver": asdict(self.solver),
            "estimate": asdict(self.estimate),
            "output": asdict(self.output),
        }
