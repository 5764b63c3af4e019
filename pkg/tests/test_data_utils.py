import json
import logging

import numpy as np
import pandas as pd
import pytest

from utils.data_utils import emit_snapshot, load_profile, load_snapshot
from utils.errors import InvalidArgumentError
from utils.fields import ExtensionField, PolarField, TraceField
from utils.grid import build_half_disk, build_half_strip, build_line
from utils.report import Check, Report


def test_zero_trace_snapshot_body(tmp_path):
    path = tmp_path / "u.csv"
    emit_snapshot(TraceField.zeros(build_line(1.0, 3)), str(path))
    assert path.read_text() == "x,u\n-1,0\n0,0\n1,0\n"


def test_field_snapshot_reads_back_exactly(tmp_path):
    grid = build_half_strip(1.0, 1.0, 5, 4, 1.3)
    rng = np.random.default_rng(0)
    field = ExtensionField(grid, rng.random(grid.shape) / 3.0)
    path = tmp_path / "w.csv"
    emit_snapshot(field, str(path))
    frame = load_snapshot(str(path))
    assert list(frame.columns) == ["x", "y", "w"]
    np.testing.assert_array_equal(frame["w"].to_numpy(), field.values.ravel())


def test_polar_snapshot_header(tmp_path):
    grid = build_half_disk(2.0, 5, 3, 0.5)
    path = tmp_path / "psi.csv"
    emit_snapshot(PolarField.zeros(grid), str(path))
    assert path.read_text().splitlines()[0] == "r,theta,psi"


def test_snapshot_of_unknown_item_is_rejected(tmp_path):
    with pytest.raises(InvalidArgumentError):
        emit_snapshot([1, 2, 3], str(tmp_path / "bad.csv"))


def test_profile_file_needs_value_column(tmp_path):
    path = tmp_path / "p.csv"
    pd.DataFrame({"x": [0.0, 1.0], "u": [1.0, 2.0]}).to_csv(path, index=False)
    with pytest.raises(InvalidArgumentError):
        load_profile(str(path))


def test_profile_file_is_sorted(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("x,value\n1,3\n-1,1\n")
    x, values = load_profile(str(path))
    np.testing.assert_array_equal(x, [-1.0, 1.0])
    np.testing.assert_array_equal(values, [1.0, 3.0])


def test_report_passes_iff_every_check_passes():
    report = Report(mode="verify")
    report.add(Check("a", 0.5, 1.0))
    assert report.passed
    report.add(Check("b", 2.0, 1.0))
    assert not report.passed


def test_merge_prefixes_names_and_metrics():
    inner = Report(metrics={"count": 3})
    inner.add(Check("bound", 0.0, 1.0))
    outer = Report().merge(inner, "suite")
    assert [check.name for check in outer.checks] == ["suite.bound"]
    assert outer.metrics == {"suite.count": 3}


def test_failed_check_is_logged_once_through_merge(caplog):
    inner = Report()
    with caplog.at_level(logging.WARNING, logger="utils.report"):
        inner.add(Check("bound", 2.0, 1.0))
        Report().merge(Report().merge(inner, "inner"), "outer")
    failures = [record for record in caplog.records if "Check failed" in record.getMessage()]
    assert len(failures) == 1


def test_report_json_is_plain_and_sorted(tmp_path):
    report = Report(mode="evolve", metrics={"z": np.float64(1.5), "a": np.arange(2)})
    report.add(Check("flag", np.float32(0.25), 1.0))
    data = json.loads(report.to_json())
    assert data["metrics"] == {"a": [0, 1], "z": 1.5}
    assert data["checks"][0]["passed"] is True
    assert list(data) == sorted(data)
    path = report.write(str(tmp_path / "report.json"))
    assert json.loads(open(path, encoding="utf-8").read()) == data
