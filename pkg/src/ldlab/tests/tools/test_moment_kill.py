"""
Tests for the moment_kill tool.
"""

import math

import pytest

from ldlab.tools.moment_kill import run_moment_kill
from ldlab.shared.data_types import ErrorCode


def test_run_moment_kill_success() -> None:
    """Test the moment_kill tool on a tilted ellipsoid."""
    c, s = math.cos(0.5), math.sin(0.5)
    rotation = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    result = run_moment_kill(semi_axes=[1.1, 1.0, 0.9], l0=20.0, center=[0.5, 0.0, -0.25], rotation=rotation)

    assert result["tool_name"] == "moment_kill"
    assert result["status"] == "success"
    payload = result["result"]
    assert payload["verified"] is True
    assert max(payload["residual"].values()) <= 1e-6
    assert math.prod(payload["lambda"]) == pytest.approx(1.0, abs=1e-12)
    assert math.prod(payload["cell_sides"]) == pytest.approx(20.0**3, rel=1e-12)
    assert payload["theta"] == pytest.approx(4.0 * math.pi / 3.0 * 0.99 / 20.0**3, rel=1e-10)


def test_run_moment_kill_small_cell() -> None:
    """Test the moment_kill tool when the cell is too small for the template."""
    result = run_moment_kill(semi_axes=[1.1, 1.0, 0.9], l0=8.0)

    assert result["status"] == "error"
    assert result["error"]["code"] == ErrorCode.THRESHOLD_VIOLATION


def test_run_moment_kill_invalid_rotation() -> None:
    """Test the moment_kill tool with a non-orthogonal rotation."""
    result = run_moment_kill(semi_axes=[1.0, 1.0, 1.0], l0=20.0, rotation=[[2.0, 0.0, 0.0], [0.0, 1.0, 0.0],
                                                                            [0.0, 0.0, 1.0]])

    assert result["status"] == "error"
    assert result["error"]["code"] == ErrorCode.INVALID_INPUT


def test_run_moment_kill_invalid_axes() -> None:
    """Test the moment_kill tool with missing and nonpositive semi-axes."""
    result = run_moment_kill(semi_axes=None, l0=20.0)
    assert result["error"]["code"] == ErrorCode.MISSING_PARAMETER

    result = run_moment_kill(semi_axes=[1.0, -1.0, 1.0], l0=20.0)
    assert result["error"]["code"] == ErrorCode.INVALID_INPUT
