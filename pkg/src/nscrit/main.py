"""Main CLI entry point for nscrit."""

from collections import Counter
from pathlib import Path
from typing import Any, Optional, Sequence

import typer
from loguru import logger
from rich.console import Console
from rich.progress import Progress
from rich.table import Table

from . import __version__
from .assembler import ReportAssembler, to_json
from .config import Config
from .duhamel import QuadratureRule
from .estimates import OPERATORS, run_estimate
from .fields import SpaceTimeField, partition_defect, read_nsf
from .grid import dyadic_partition, write_partition_csv
from .harness import DEFAULT_SWEEPS, GRID_PRESETS, ExperimentConfig, run_case
from .norms import NORM_SPACES, measure
from .presets import build_inputs
from .solver import ProblemData, picard_solve, residual
from .utils import ConfigError, GridError, NormError, NSCritError, init_logging

app = typer.Typer(
    name="nscrit",
    help="Numerical lab for critical spaces of the Navier-Stokes mild formulation.",
    no_args_is_help=True,
)

console = Console()

# Short names accepted by `cx --case`.
CASE_ALIASES = {
    "y2": "y2-unbounded",
    "hilbert": "hilbert-l1",
    "kt": "kt-blowup",
    "gap": "multiplier-gap",
    "obstruction": "ykt-obstruction",
}

USAGE_ERRORS = (ConfigError, GridError, NormError, FileNotFoundError)
EXIT_UNCERTIFIED = 3


def _handle_failure(e: Exception, verbose: bool) -> typer.Exit:
    """Log a failure and map it to an exit code: 2 for bad input, 1 otherwise."""
    if isinstance(e, USAGE_ERRORS):
        logger.error(f"Invalid input: {e}", exc_info=verbose)
        console.print(f"[red]Error:[/red] {e}")
        return typer.Exit(code=2)
    if isinstance(e, NSCritError):
        logger.error(f"nscrit error: {e}", exc_info=verbose)
        console.print(f"[red]Error:[/red] {e}")
        return typer.Exit(code=1)
    logger.critical(f"Unexpected error: {e}", exc_info=True)
    console.print(f"[red]Unexpected error:[/red] {e}")
    if verbose:
        console.print_exception()
    return typer.Exit(code=1)


def _load_config(path: Optional[Path]) -> Config:
    if path is None:
        logger.info("Using default configuration")
        return Config()
    cfg = Config.from_file(path)
    logger.info(f"Configuration loaded from: {path}")
    return cfg


def _quadrature(cfg: Config) -> QuadratureRule:
    return QuadratureRule(scheme=cfg.solver.scheme, nodes_per_panel=cfg.solver.nodes_per_panel)


def _parse_values(raw: Optional[str]) -> list[float]:
    if not raw:
        return []
    try:
        return [float(item) for item in raw.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(f"Could not parse sweep values '{raw}': {e}") from e


def _echo(payload: Any) -> None:
    console.print_json(to_json(payload))


@app.command()
def solve(
    config: Optional[Path] = typer.Option(
        None,
        "--config",
        help="Path to a YAML or JSON configuration file.",
        exists=True,
        dir_okay=False,
    ),
    output: Optional[Path] = typer.Option(
        None,
        "--output",
        help="Output directory (default: output.directory from the config).",
    ),
    require_certified: bool = typer.Option(
        False,
        "--require-certified",
        help="Exit with code 3 when the run is not certified.",
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging."),
) -> None:
    """Solve the mild formulation by Picard iteration and certify the result.

    Writes the SolutionTrace as JSON and, unless disabled, the solution as NSF1.
    """
    certified = True
    init_logging(output, verbose)
    try:
        cfg = _load_config(config)
        output_path = output or Path(cfg.output.directory)
        grid = cfg.make_grid()
        with Progress(console=console) as progress:
            task = progress.add_task("[cyan]Building problem data...", total=None)
            inputs = build_inputs(cfg, grid, config.parent if config else None)
            data = ProblemData(
                inputs.u0, inputs.forcing, inputs.forcing_split, cfg.solver.space, cfg.solver.p, cfg.solver.q
            )
            rule = _quadrature(cfg)
            progress.update(task, description="[cyan]Picard iteration...")
            trace = picard_solve(
                data, cfg.solver.max_iter, cfg.solver.tol, cfg.solver.c0, rule, cfg.solver.c0_safety
            )
            progress.update(task, completed=True)

        report = trace.to_dict()
        report["residual"] = residual(data, trace.solution, rule)
        if inputs.exact is not None:
            exact_size = inputs.exact.l2_norm() or 1.0
            report["exact_error"] = (trace.solution - inputs.exact).l2_norm() / exact_size
        report["config"] = cfg.to_dict()

        assembler = ReportAssembler(output_path, "solve")
        assembler.write_json("trace", report)
        if cfg.output.write_fields:
            try:
                assembler.write_field("solution", trace.solution)
            except NSCritError as e:
                console.print(f"[yellow]⚠ Solution field not saved: {e}[/yellow]")
                logger.error(f"Solution field not saved: {e}", exc_info=verbose)
                assembler.record_error(f"solution: {e}")
        assembler.write_metadata()
        _echo(report)
        certified = trace.certified
        status = "[green]certified[/green]" if certified else "[yellow]not certified[/yellow]"
        console.print(f"{trace.iterations} iterations, margin {trace.margin:.4f}: {status}")
    except Exception as e:
        raise _handle_failure(e, verbose) from e
    finally:
        logger.info("nscrit solve finished.")

    if require_certified and not certified:
        raise typer.Exit(code=EXIT_UNCERTIFIED)


@app.command()
def norm(
    space: str = typer.Option(..., "--space", help=f"Norm to evaluate: {', '.join(NORM_SPACES)}."),
    input: Path = typer.Option(
        ...,
        "--input",
        help="NSF1 field to measure.",
        exists=True,
        dir_okay=False,
    ),
    p: float = typer.Option(2.0, "--p", help="Morrey integrability exponent."),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Morrey scaling exponent (default: D)."),
    q: float = typer.Option(8.0, "--q", help="YKT,q exponent."),
    center_stride: int = typer.Option(1, "--center-stride", help="Lattice stride of sampled centers."),
    output: Optional[Path] = typer.Option(None, "--output", help="Directory for the JSON report."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging."),
) -> None:
    """Evaluate a discrete norm of a field and report its witness cylinder."""
    init_logging(output, verbose)
    try:
        field = read_nsf(input)
        report = measure(field, space, p=p, lam=lam, q=q, center_stride=center_stride)
        payload = {"input": str(input), **report.to_dict()}
        if output is not None:
            ReportAssembler(output, "norm").write_json(space, payload)
        _echo(payload)
    except Exception as e:
        raise _handle_failure(e, verbose) from e
    finally:
        logger.info("nscrit norm finished.")


@app.command()
def estimate(
    operator: str = typer.Option(..., "--operator", help=f"Estimate to run: {', '.join(OPERATORS)}."),
    config: Optional[Path] = typer.Option(
        None,
        "--config",
        help="Configuration file supplying the grid and estimate defaults.",
        exists=True,
        dir_okay=False,
    ),
    size: Optional[int] = typer.Option(None, "--size", help="Ensemble size."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Ensemble seed."),
    sigma: Optional[str] = typer.Option(None, "--sigma", help="Symbol: abs, partial_<j> or b_<i>_<j>_<k>."),
    output: Optional[Path] = typer.Option(None, "--output", help="Directory for the JSON reports."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging."),
) -> None:
    """Estimate an inequality constant over a seeded random ensemble."""
    init_logging(output, verbose)
    try:
        cfg = _load_config(config)
        est = cfg.estimate
        grid = cfg.make_grid()
        n = size if size is not None else est.ensemble_size
        if n < 1:
            raise ConfigError("--size must be at least 1")
        with Progress(console=console) as progress:
            task = progress.add_task(f"[cyan]Estimating {operator}...", total=n)
            reports = run_estimate(
                operator,
                grid,
                ensemble_size=n,
                seed=seed if seed is not None else est.seed,
                sigma=sigma or est.sigma,
                T=est.T,
                p=est.p,
                q=est.q,
                alpha=est.alpha,
                beta=est.beta,
                on_sample=lambda: progress.update(task, advance=1),
                rule=_quadrature(cfg),
            )
        payload = [r.to_dict() for r in reports]
        if output is not None:
            ReportAssembler(output, "estimate").write_json(operator, payload)
        _echo(payload)
        for r in reports:
            console.print(f"[bold]{r.operator}[/bold]: mean {r.mean:.4g}, max {r.max:.4g}")
    except Exception as e:
        raise _handle_failure(e, verbose) from e
    finally:
        logger.info("nscrit estimate finished.")


@app.command()
def cx(
    case: str = typer.Option(
        ..., "--case", help=f"Experiment: {', '.join(DEFAULT_SWEEPS)} (or {', '.join(CASE_ALIASES)})."
    ),
    values: Optional[str] = typer.Option(
        None,
        "--values",
        "--deltas",
        "--ns",
        "--radii",
        "--epsilons",
        help="Comma-separated sweep values (default: the case's standard sweep).",
    ),
    preset: str = typer.Option("desk", "--preset", help=f"Grid preset: {', '.join(GRID_PRESETS)}."),
    output: Optional[Path] = typer.Option(None, "--output", help="Directory for the JSON and CSV reports."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging."),
) -> None:
    """Run a counterexample experiment and fit its divergence trend."""
    init_logging(output, verbose)
    try:
        experiment = ExperimentConfig(CASE_ALIASES.get(case, case), _parse_values(values), preset, output)
        with Progress(console=console) as progress:
            task = progress.add_task(f"[cyan]Running {experiment.case}...", total=None)
            report = run_case(experiment)
            progress.update(task, completed=True)
        if output is not None:
            assembler = ReportAssembler(output, "cx")
            assembler.write_json(report.case, report.to_dict())
            assembler.write_trend_csv(report)
        _echo(report.to_dict())
        console.print(f"[bold]{report.case}[/bold]: slope {report.slope:.4g}, R² {report.r_squared:.5f}")
    except Exception as e:
        raise _handle_failure(e, verbose) from e
    finally:
        logger.info("nscrit cx finished.")


@app.command()
def partition(
    config: Optional[Path] = typer.Option(
        None,
        "--config",
        help="Configuration file supplying the grid.",
        exists=True,
        dir_okay=False,
    ),
    input: Optional[Path] = typer.Option(
        None,
        "--input",
        help="NSF1 field; its grid is used and its dyadic Parseval defect reported.",
        exists=True,
        dir_okay=False,
    ),
    csv: bool = typer.Option(False, "--csv", help="Export the cell masks as CSV."),
    output: Optional[Path] = typer.Option(None, "--output", help="Directory for the reports."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging."),
) -> None:
    """Build the dyadic partition of a grid and check that it covers every sample once."""
    init_logging(output, verbose)
    try:
        field: Optional[SpaceTimeField] = read_nsf(input) if input is not None else None
        grid = field.grid if field is not None else _load_config(config).make_grid()
        cells = dyadic_partition(grid)
        counts = Counter(cell.j for cell, _ in cells)
        covered = sum(len(index_set) for _, index_set in cells)
        payload: dict[str, Any] = {
            "grid": grid.to_header(),
            "cells": len(cells),
            "cells_per_scale": {str(j): counts[j] for j in sorted(counts)},
            "samples": grid.n_samples,
            "covered": covered,
            "exact_cover": covered == grid.n_samples,
        }
        if field is not None:
            payload["parseval_defect"] = partition_defect(field, cells)

        if output is not None:
            assembler = ReportAssembler(output, "partition")
            assembler.write_json("partition", payload)
            if csv:
                write_partition_csv(output / assembler.get_output_filename("cells", "csv"), cells)
        elif csv:
            raise ConfigError("--csv needs --output")

        table = Table(title="Dyadic partition")
        table.add_column("scale j", justify="right")
        table.add_column("cells", justify="right")
        for j in sorted(counts):
            table.add_row(str(j), str(counts[j]))
        console.print(table)
        _echo(payload)
    except Exception as e:
        raise _handle_failure(e, verbose) from e
    finally:
        logger.info("nscrit partition finished.")


@app.command()
def version() -> None:
    """Show version information."""
    console.print(f"[bold]nscrit[/bold] v{__version__}")


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI on `argv` and return its exit code instead of exiting."""
    try:
        app(args=list(argv) if argv is not None else None, prog_name="nscrit")
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else (0 if e.code is None else 1)
    return 0


if __name__ == "__main__":
    raise SystemExit(cli_main())
