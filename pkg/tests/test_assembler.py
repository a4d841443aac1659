"""Tests for output assembler module."""

import json

import numpy as np
import pytest

from nscrit.assembler import ReportAssembler, to_json
from nscrit.fields import SpaceTimeField, read_nsf
from nscrit.harness import TrendReport
from nscrit.utils import NSCritError


def test_write_json_handles_numpy(temp_output_dir):
    assembler = ReportAssembler(temp_output_dir, run_name="norm")
    path = assembler.write_json("y2", {"value": np.float64(1.5), "times": np.arange(3), "where": temp_output_dir})

    assert path.exists()
    assert path.suffix == ".json"
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["value"] == 1.5
    assert data["times"] == [0, 1, 2]
    assert data["where"] == str(temp_output_dir)


def test_to_json_rejects_unknown_objects():
    with pytest.raises(TypeError, match="not JSON serializable"):
        to_json({"bad": object()})


def test_write_trend_csv(temp_output_dir):
    assembler = ReportAssembler(temp_output_dir, run_name="cx")
    report = TrendReport("kt-blowup", [0.01, 0.001], [7.1, 7.6], "m", 4.0, 1.0, 1.0)
    path = assembler.write_trend_csv(report)

    rows = path.read_text(encoding="utf-8").strip().splitlines()
    assert rows[0] == "sweep,measured"
    assert rows[1] == "0.01,7.1"
    assert len(rows) == 3
    assert path.name.endswith("_cx_kt-blowup.csv")


def test_write_field(temp_output_dir, grid_2d):
    assembler = ReportAssembler(temp_output_dir, run_name="solve")
    field = SpaceTimeField(grid_2d, np.ones((2,) + grid_2d.sample_shape))
    path = assembler.write_field("solution", field)

    assert path.suffix == ".nsf"
    np.testing.assert_array_equal(read_nsf(path).values, field.values)


def test_failed_write_is_not_listed(temp_output_dir, grid_2d, mocker):
    mocker.patch("nscrit.assembler.write_nsf", side_effect=OSError("disk full"))
    assembler = ReportAssembler(temp_output_dir, run_name="solve")
    with pytest.raises(NSCritError, match="disk full"):
        assembler.write_field("solution", SpaceTimeField.zeros(grid_2d, 2))
    assert assembler.metadata["files"] == []


def test_record_error(temp_output_dir):
    assembler = ReportAssembler(temp_output_dir)
    assembler.record_error("Something went wrong")

    assert len(assembler.metadata["errors"]) == 1
    assert "Something went wrong" in assembler.metadata["errors"][0]


def test_metadata_lists_written_files(temp_output_dir):
    assembler = ReportAssembler(temp_output_dir, run_name="solve")
    first = assembler.write_json("trace", {"iterations": 3})
    path = assembler.write_metadata()

    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["command"] == "solve"
    assert data["files"] == [first.name]
    assert path.name.endswith("_solve_metadata.json")


def test_get_output_filename(temp_output_dir):
    assembler = ReportAssembler(temp_output_dir, run_name="estimate")
    name = assembler.get_output_filename("bilinear", "json")

    assert name.endswith("_estimate_bilinear.json")
    assert len(name) > len("_estimate_bilinear.json") + 10  # timestamp prefix


def test_creates_output_directory(tmp_path):
    target = tmp_path / "nested" / "out"
    ReportAssembler(target)
    assert target.is_dir()
