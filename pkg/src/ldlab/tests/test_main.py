"""
Tests for the ldlab command line.
"""

import pytest

from ldlab.main import EXIT_CONFIG, EXIT_OK, build_parser, run_command


def test_parser_requires_command():
    """Test that a command is required."""
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_run_with_missing_config(tmp_path):
    """Test exit code 2 when the configuration file does not exist."""
    assert run_command(["run", "--config", str(tmp_path / "missing.conf")]) == EXIT_CONFIG


def test_run_with_invalid_override(tmp_path):
    """Test exit code 2 for an invalid override and that nothing is written."""
    out = tmp_path / "out"
    path = tmp_path / "sweep.conf"
    path.write_text(f"mode = lower\nout_path = {out}\n", encoding="utf-8")

    assert run_command(["run", "--config", str(path), "--grid-n", "4"]) == EXIT_CONFIG
    assert not out.exists()


def test_run_lower_sweep(tmp_path):
    """Test a successful sweep from the command line."""
    out = tmp_path / "out"
    path = tmp_path / "sweep.conf"
    path.write_text(f"mode = lower\ntheta_grid = 1e-5, 1e-4\nout_path = {out}\n", encoding="utf-8")

    assert run_command(["run", "--config", str(path), "--record-runtime", "false"]) == EXIT_OK
    assert (out / "results.csv").exists()
    assert (out / "report.json").exists()


def test_version_flag(capsys):
    """Test the version flag."""
    with pytest.raises(SystemExit) as excinfo:
        run_command(["--version"])
    assert excinfo.value.code == 0
    assert "ldlab" in capsys.readouterr().out
