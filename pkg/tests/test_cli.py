import json
import logging

import numpy as np
import pytest

import app
from utils.data_utils import load_snapshot
from utils.report import Check, Report


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_report(directory):
    with open(directory / "report.json", encoding="utf-8") as handle:
        return json.load(handle)


def test_aux_solve_with_zero_data(tmp_path):
    config = write_config(tmp_path, "R = 2\nspacing = 0.25\ninitial = constant\nvalue = 0\n")
    out = tmp_path / "out"
    code = app.main(["aux-solve", "--config", config, "--output", str(out), "--quiet"])
    assert code == app.EXIT_OK
    report = read_report(out)
    assert report["passed"] is True
    assert report["mode"] == "aux-solve"
    z = load_snapshot(str(out / "z.csv"))
    assert list(z.columns) == ["x", "u"]
    assert not np.any(z["u"].to_numpy())


def test_reports_are_deterministic(tmp_path):
    config = write_config(tmp_path, "R = 2\nspacing = 0.25\nm = 2\nepsilon = 0.1\n")
    for name in ("a", "b"):
        assert app.main(["aux-solve", "--config", config, "--output", str(tmp_path / name), "--quiet"]) == 0
    first = (tmp_path / "a" / "report.json").read_bytes()
    second = (tmp_path / "b" / "report.json").read_bytes()
    assert first == second


def test_evolve_writes_snapshots_and_diagnostics(tmp_path):
    config = write_config(tmp_path, "R = 2\nspacing = 0.25\nT = 0.1\nepsilon = 0.05\nm = 2\nsnapshots = 3\n")
    out = tmp_path / "out"
    assert app.main(["evolve", "--config", config, "--output", str(out), "--quiet"]) == app.EXIT_OK
    for name in ("u_00000.csv", "u_00002.csv", "w_final.csv", "diagnostics.csv", "profiles.html"):
        assert (out / name).exists(), name
    diagnostics = load_snapshot(str(out / "diagnostics.csv"))
    assert list(diagnostics.columns) == ["t", "energy", "lyapunov", "mass", "iterations"]
    report = read_report(out)
    assert report["provenance"]["config"]["solver"]["R"] == 2.0
    assert report["provenance"]["grids"]["half_strip"]["nx"] == 17


def test_solver_failure_exits_with_partial_artifacts(tmp_path):
    config = write_config(tmp_path, "R = 2\nspacing = 0.25\nT = 1\nepsilon = 0.5\nm = 3\nmax_newton = 1\nwidth = 1.5\n")
    out = tmp_path / "out"
    assert app.main(["evolve", "--config", config, "--output", str(out), "--quiet"]) == app.EXIT_RUN_FAILURE
    report = read_report(out)
    assert report["passed"] is False
    assert "step 1 failed" in report["error"]
    assert (out / "diagnostics.csv").exists()


@pytest.mark.parametrize("text", ["R = 2\nsigma = 1\n", "T = 1\n", "R = x\n"])
def test_config_errors_exit_with_three(tmp_path, text):
    config = write_config(tmp_path, text)
    assert app.main(["evolve", "--config", config, "--output", str(tmp_path / "out"), "--quiet"]) == app.EXIT_CONFIG_ERROR


@pytest.mark.parametrize("mode, text", [
    ("evolve", "R = 2\nspacing = 0.25\namp = -1\n"),
    ("evolve", "R = 2\nspacing = 0.25\nwidth = 0\n"),
    ("probe-barrier", "ntheta = 2\n"),
    ("probe-barrier", "per_octave = 0\n"),
])
def test_out_of_range_values_exit_with_three(tmp_path, mode, text):
    config = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert app.main([mode, "--config", config, "--output", str(out), "--quiet"]) == app.EXIT_CONFIG_ERROR
    assert not (out / "report.json").exists()


def test_negative_profile_file_exits_with_three(tmp_path):
    (tmp_path / "u0.csv").write_text("x,value\n-2,0\n0,-1\n2,0\n")
    config = write_config(tmp_path, "R = 2\nspacing = 0.25\ninitial = file\ninitial_file = u0.csv\n")
    code = app.main(["evolve", "--config", config, "--output", str(tmp_path / "out"), "--quiet"])
    assert code == app.EXIT_CONFIG_ERROR


def test_missing_config_file(tmp_path):
    code = app.main(["evolve", "--config", str(tmp_path / "absent.cfg"), "--quiet"])
    assert code == app.EXIT_CONFIG_ERROR


@pytest.mark.parametrize("value", ["zero", "0", "-2"])
def test_bad_thread_count(tmp_path, monkeypatch, value):
    monkeypatch.setenv("FRACPME_THREADS", value)
    config = write_config(tmp_path, "R = 2\n")
    assert app.main(["aux-solve", "--config", config, "--output", str(tmp_path), "--quiet"]) == app.EXIT_CONFIG_ERROR


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv("FRACPME_THREADS", "4")
    assert app.worker_count() == 4
    monkeypatch.delenv("FRACPME_THREADS")
    assert app.worker_count() == 1


def test_seed_flag_overrides_the_config(tmp_path):
    config = write_config(tmp_path, "mode = verify\nseed = 3\n")
    args = app.build_parser().parse_args(["verify", "--config", config, "--seed", "11"])
    loaded = app.load_config(args)
    assert loaded.seed == 11
    assert loaded.echo["seed"] == 11


def test_exit_code_mapping():
    assert app.exit_code(Report(mode="evolve", checks=[Check("x", 1.0, 0.0)])) == app.EXIT_OK
    assert app.exit_code(Report(mode="verify", checks=[Check("x", 1.0, 0.0)])) == app.EXIT_VERIFY_FAILURE
    assert app.exit_code(Report(mode="verify", checks=[Check("x", 0.0, 1.0)])) == app.EXIT_OK
    assert app.exit_code(Report(mode="verify", error="boom")) == app.EXIT_RUN_FAILURE


def test_probe_barrier_writes_the_product_table(tmp_path):
    config = write_config(tmp_path, "[probe]\nprobe_R = 4, 8\nper_octave = 6\nntheta = 9\n")
    out = tmp_path / "out"
    assert app.main(["probe-barrier", "--config", config, "--output", str(out), "--quiet"]) == app.EXIT_OK
    table = load_snapshot(str(out / "flux_decay.csv"))
    assert list(table.columns) == ["R", "s", "product", "s_times_R", "gap"]
    assert (out / "psi_R4.csv").exists()


@pytest.mark.slow
def test_quick_verification_suite_passes(tmp_path):
    out = tmp_path / "verify"
    assert app.main(["verify", "--output", str(out), "--quiet"]) == app.EXIT_OK
    report = read_report(out)
    assert report["passed"] is True
    assert (out / "checks.csv").exists()


@pytest.mark.slow
def test_converge_table_decreases(tmp_path):
    config = write_config(tmp_path, "R = 20\nspacing = 0.2\nepsilon = 0.1\ninitial = cauchy\nlevels = 2\nerror_bound = 0.05\n")
    out = tmp_path / "out"
    assert app.main(["converge", "--config", config, "--output", str(out), "--quiet"]) == app.EXIT_OK
    table = load_snapshot(str(out / "convergence.csv"))
    errors = table["sup_error"].to_numpy()
    assert errors[1] < errors[0]


def test_converge_warns_about_non_benchmark_data(tmp_path, caplog):
    config = write_config(tmp_path, "R = 2\nspacing = 0.25\nepsilon = 0.5\nlevels = 1\ninitial = bump\n")
    out = tmp_path / "out"
    with caplog.at_level(logging.WARNING):
        assert app.main(["converge", "--config", config, "--output", str(out), "--quiet"]) == app.EXIT_OK
    assert any("benchmark data is 'cauchy'" in record.getMessage() for record in caplog.records)
    assert read_report(out)["provenance"]["config"]["initial_data"]["kind"] == "bump"
