"""Report assembly and file generation."""

import csv
import json
from datetime import datetime
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

from .fields import SpaceTimeField, write_nsf
from .harness import TrendReport
from .utils import NSCritError, ensure_directory


def _json_default(value: Any) -> Any:
    """Serialize numpy scalars and arrays that reach the report payloads."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def to_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, default=_json_default)


class ReportAssembler:
    """Write the JSON, CSV and NSF1 artifacts of one run into an output directory."""

    def __init__(self, output_dir: Path, run_name: str = "run"):
        """Initialize assembler.

        Args:
            output_dir: Directory for output files.
            run_name: Command or case name used as the filename suffix.
        """
        self.output_dir = ensure_directory(output_dir)
        self.run_name = run_name
        self.timestamp = datetime.now().strftime("%d%m%y_%H%M%S")
        self.metadata: dict[str, Any] = {
            "created": datetime.now().isoformat(),
            "command": run_name,
            "files": [],
            "errors": [],
        }

    def get_output_filename(self, name: str, suffix: str) -> str:
        """Filename in format DDMMYY_HHMMSS_runname_name.suffix."""
        return f"{self.timestamp}_{self.run_name}_{name}.{suffix}"

    def _target(self, name: str, suffix: str) -> Path:
        return self.output_dir / self.get_output_filename(name, suffix)

    def _written(self, path: Path) -> Path:
        self.metadata["files"].append(path.name)
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        """Save a report payload as indented JSON.

        Raises:
            NSCritError: If the file cannot be written.
        """
        path = self._target(name, "json")
        try:
            path.write_text(to_json(payload), encoding="utf-8")
        except (OSError, TypeError) as e:
            raise NSCritError(f"Failed to save {path}: {e}") from e
        logger.info(f"Saved {name} report to {path}")
        return self._written(path)

    def write_trend_csv(self, report: TrendReport) -> Path:
        """Two columns (sweep value, measured value), one row per sweep point."""
        path = self._target(report.case, "csv")
        try:
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(["sweep", "measured"])
                writer.writerows(report.csv_rows())
        except OSError as e:
            raise NSCritError(f"Failed to save {path}: {e}") from e
        logger.info(f"Saved trend CSV to {path}")
        return self._written(path)

    def write_field(self, name: str, field: SpaceTimeField) -> Path:
        path = self._target(name, "nsf")
        try:
            write_nsf(path, field)
        except OSError as e:
            raise NSCritError(f"Failed to save field {path}: {e}") from e
        return self._written(path)

    def record_error(self, error_msg: str) -> None:
        self.metadata["errors"].append(error_msg)
        logger.warning(f"Recorded error: {error_msg}")

    def write_metadata(self) -> Path:
        path = self.output_dir / f"{self.timestamp}_{self.run_name}_metadata.json"
        path.write_text(to_json(self.metadata), encoding="utf-8")
        logger.debug(f"Saved run metadata to {path}")
        return path
