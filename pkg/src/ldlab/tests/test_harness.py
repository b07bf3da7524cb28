"""
Tests for the sweep configuration, the sweep runner and the verification suite.
"""

import csv
import json
import math

import pytest

from ldlab.harness import (
    CSV_COLUMNS, SweepConfig, _fit_rates, build_config, csv_cell, load_config, random_ellipsoid, run_sweep,
    verify_suite,
)
from ldlab.shared.data_types import ErrorCode, LdlabError


def _config(tmp_path, **values) -> SweepConfig:
    raw = {"out_path": str(tmp_path / "out"), "record_runtime": "false"}
    raw.update({key: str(value) for key, value in values.items()})
    return build_config(raw)


def test_build_config_defaults():
    """Test the default configuration."""
    config = build_config({})

    assert config.mode == "full"
    assert config.theta_grid == (0.02, 0.005, 0.00125, 0.0003)
    assert config.l_rule == ("product", 13.6)
    assert config.grid_n == 16
    assert config.record_runtime is True
    assert config.refs.label == "ball ansatz"


@pytest.mark.parametrize("values", [
    {"colour": "blue"},
    {"mode": "sideways"},
    {"theta_grid": ""},
    {"theta_grid": "0.1, 1.5"},
    {"theta_grid": "0.1, x"},
    {"grid_n": "4"},
    {"grid_n": "sixteen"},
    {"l_rule": "product"},
    {"l_rule": "scaled:3"},
    {"l_rule": "fixed:-1"},
    {"e_star": "-5"},
    {"samples": "0"},
    {"record_runtime": "maybe"},
    {"out_path": " "},
])
def test_build_config_errors(values):
    """Test that invalid values are configuration errors."""
    with pytest.raises(LdlabError) as excinfo:
        build_config(values)
    assert excinfo.value.code == ErrorCode.CONFIG_ERROR


def test_box_side_rules():
    """Test the product and fixed box-side rules."""
    product = build_config({"l_rule": "product:13.6"})
    fixed = build_config({"l_rule": "fixed:50"})

    assert product.box_side(0.008) == pytest.approx(13.6 / 0.2)
    assert fixed.box_side(0.008) == 50.0


def test_load_config_with_overrides(tmp_path):
    """Test reading a configuration file and applying command-line overrides."""
    path = tmp_path / "sweep.conf"
    path.write_text("mode = lower\ntheta-grid = 1e-4, 1e-5\nseed = 3\n", encoding="utf-8")
    config = load_config(str(path), {"seed": "9", "e_star": "5.2"})

    assert config.mode == "lower"
    assert config.theta_grid == (1e-4, 1e-5)
    assert config.seed == 9
    assert config.refs.eStar == 5.2
    assert config.to_dict()["e_star_label"] == "configured"


def test_load_config_missing_file(tmp_path):
    """Test that an unreadable configuration file is a configuration error."""
    with pytest.raises(LdlabError) as excinfo:
        load_config(str(tmp_path / "missing.conf"))
    assert excinfo.value.code == ErrorCode.CONFIG_ERROR


def test_csv_cell_formatting():
    """Test the CSV cell formatting of strings, integers and floats."""
    assert csv_cell("upper") == "upper"
    assert csv_cell(729) == "729"
    assert float(csv_cell(0.1)) == 0.1
    assert csv_cell(float("nan")) == csv_cell(float("nan"))


def test_lower_sweep_writes_reproducible_files(tmp_path):
    """Test the lower-bound sweep output and its byte reproducibility."""
    config = _config(tmp_path, mode="lower", theta_grid="1e-9, 1e-8, 1e-7")
    report = run_sweep(config)
    csv_bytes = (config.out_path / "results.csv").read_bytes()
    json_bytes = (config.out_path / "report.json").read_bytes()

    assert report.passed
    assert report.exit_code == 0
    assert 0.15 <= report.rate_fits["lower"] <= 0.25
    names = [check["name"] for check in report.checks]
    assert "rate/lower" in names
    assert sum(name.startswith("lower/schedule_within_5_percent/") for name in names) == 3

    with open(config.out_path / "results.csv", newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [row[0] for row in rows[1:]] == ["lower"] * 3
    assert all(row[-1] == csv_cell(0.0) for row in rows[1:])

    payload = json.loads(json_bytes)
    assert payload["passed"] is True
    assert payload["config"]["mode"] == "lower"
    assert len(payload["rows"]) == 3

    run_sweep(config)
    assert (config.out_path / "results.csv").read_bytes() == csv_bytes
    assert (config.out_path / "report.json").read_bytes() == json_bytes


def test_bc_ordering_sweep(tmp_path):
    """Test the boundary-condition sweep on small grids."""
    config = _config(tmp_path, mode="bc-ordering", theta_grid="0.25, 0.5", grid_n=8, samples=2)
    report = run_sweep(config)

    assert report.passed
    assert [row["details"]["violations"] for row in report.rows] == [0, 0]
    assert [row["n"] for row in report.rows] == [8, 8]
    assert [row["details"]["theta_effective"] for row in report.rows] == [0.25, 0.5]


def test_lower_sweep_asserts_rates_in_power_law_regime(tmp_path):
    """Test that rate and schedule checks cover only the small-theta points while every row is written."""
    config = _config(tmp_path, mode="lower", theta_grid="1e-8, 1e-7, 1e-4, 1e-2")
    report = run_sweep(config)

    rate = [check for check in report.checks if check["name"] == "rate/lower"]
    schedule = [check["name"] for check in report.checks if "schedule_within_5_percent" in check["name"]]
    assert len(report.rows) == 4
    assert rate[0]["details"]["thetas"] == [1e-8, 1e-7]
    assert rate[0]["passed"]
    assert len(schedule) == 2
    assert report.rows[3]["details"]["schedule_within_5_percent"] is False
    assert report.passed


def test_rate_checks_fail_outside_window(tmp_path):
    """Test that a lower rate below the threshold fails the sweep."""
    config = _config(tmp_path, mode="lower", theta_grid="1e-9, 1e-7")
    report = run_sweep(config)
    report.checks = [check for check in report.checks if check["name"] != "rate/lower"]
    for row in report.rows:
        row["gap"] = 1.0
    _fit_rates(report)

    rate = [check for check in report.checks if check["name"] == "rate/lower"][0]
    assert rate["details"]["slope"] == pytest.approx(0.0, abs=1e-12)
    assert not rate["passed"]
    assert report.exit_code == 1


@pytest.mark.slow
def test_upper_sweep_rate(tmp_path):
    """Test the theta^(1/3) rate of the lattice competitor at fixed theta^(1/3) L."""
    config = _config(tmp_path, mode="upper", theta_grid="0.02, 0.005, 0.00125")
    report = run_sweep(config)

    rate = [check for check in report.checks if check["name"] == "rate/upper"][0]
    assert rate["passed"], rate["details"]
    assert report.passed


@pytest.mark.slow
@pytest.mark.parametrize("n", [16, 24])
def test_bc_ordering_sweep_at_scale(tmp_path, n):
    """Test zero ordering violations on 100 seeded neutral sets per density."""
    config = _config(tmp_path, mode="bc-ordering", theta_grid="0.1, 0.3, 0.5", grid_n=n, samples=100)
    report = run_sweep(config)

    assert [row["details"]["violations"] for row in report.rows] == [0, 0, 0]
    assert report.passed


def test_moment_kill_row_has_no_grid(tmp_path):
    """Test that the moment-kill row keeps the sample count in its details."""
    config = _config(tmp_path, mode="moment-kill", theta_grid="0.02", samples=2)
    report = run_sweep(config)

    assert report.rows[0]["n"] == 0
    assert report.rows[0]["details"]["samples"] == 2
    assert len(report.rows[0]["details"]["results"]) == 2


def test_full_sweep_sandwich(tmp_path):
    """Test that the full sweep checks certificate <= construction at every theta."""
    config = _config(tmp_path, mode="full", theta_grid="0.02", grid_n=8, samples=1, workers=2)
    report = run_sweep(config)

    assert [row["mode"] for row in report.rows] == ["upper", "lower", "bc-ordering", "moment-kill"]
    sandwich = [check for check in report.checks if check["name"].startswith("sandwich/")]
    assert len(sandwich) == 1
    assert sandwich[0]["passed"]
    assert report.passed


def test_failed_point_becomes_error_row(tmp_path):
    """Test that a point violating a precondition yields a NaN row and a failed check."""
    config = _config(tmp_path, mode="upper", theta_grid="0.02", l_rule="fixed:20")
    report = run_sweep(config)

    assert report.exit_code == 1
    assert math.isnan(report.rows[0]["value"])
    assert report.rows[0]["details"]["error"]["code"] == ErrorCode.THRESHOLD_VIOLATION
    assert (config.out_path / "results.csv").exists()


def test_complement_upper_point(tmp_path):
    """Test that theta > 1/2 uses the complement competitor."""
    config = _config(tmp_path, mode="upper", theta_grid="0.98", l_rule="fixed:40")
    report = run_sweep(config)

    row = report.rows[0]
    assert row["details"]["energy"]["total"] > 0.0
    assert row["value"] > 0.0
    assert report.passed


def test_output_error(tmp_path):
    """Test that an output path occupied by a file is an output error."""
    blocker = tmp_path / "out"
    blocker.write_text("not a directory", encoding="utf-8")
    config = _config(tmp_path, mode="lower", theta_grid="1e-4")
    with pytest.raises(LdlabError) as excinfo:
        run_sweep(config)
    assert excinfo.value.code == ErrorCode.OUTPUT_ERROR


def test_random_ellipsoid_is_seeded():
    """Test that the random template depends only on the seed."""
    first = random_ellipsoid(4)
    second = random_ellipsoid(4)

    assert first.volume == second.volume
    assert first.diameter() == second.diameter()


def test_verify_suite_passes(tmp_path):
    """Test that every verification check passes on a small configuration."""
    config = _config(tmp_path, grid_n=8, samples=1)
    report = verify_suite(config)

    failed = [check["name"] for check in report["checks"] if not check["passed"]]
    assert failed == []
    checks = {check["name"]: check for check in report["checks"]}
    assert checks["energy/free_space_rescaling"]["details"]["relative_difference"] <= 1e-6
    assert "energy/continuum_refinement" in checks
    assert {f"fields_bc/orderings/n={n}/theta=0.3" for n in (8, 24)} <= set(checks)
    assert json.loads((config.out_path / "verify.json").read_text(encoding="utf-8"))["passed"] is True


def test_verify_suite_detects_perimeter_fault(tmp_path):
    """Test that a corrupted complement perimeter fails the complement identity."""
    config = _config(tmp_path, grid_n=8, samples=1)
    report = verify_suite(config, perimeter_fault=1)

    assert report["passed"] is False
    failed = [check["name"] for check in report["checks"] if not check["passed"]]
    assert failed and all(name.startswith("geometry/complement_identity") for name in failed)
