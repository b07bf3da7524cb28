"""
Tests for the bc_energies tool.
"""

from ldlab.tools.bc_energies import get_bc_energies
from ldlab.shared.data_types import ErrorCode


def test_get_bc_energies_success() -> None:
    """Test the bc_energies tool on a seeded random set."""
    result = get_bc_energies(theta=0.3, n=10, seed=3)

    assert result["tool_name"] == "bc_energies"
    assert result["status"] == "success"
    payload = result["result"]
    assert payload["L"] == 10.0
    assert payload["volume"] == 300.0
    assert payload["theta_effective"] == 0.3
    assert set(payload["energies"]) == {"dirichlet", "neumann", "periodic", "free_space"}
    assert payload["orderings_hold"] is True
    assert all(margin >= -1e-8 for margin in payload["orderings"].values())


def test_get_bc_energies_is_reproducible() -> None:
    """Test that the same seed gives the same energies."""
    first = get_bc_energies(theta=0.2, n=8, L=4.0, seed=5)
    second = get_bc_energies(theta=0.2, n=8, L=4.0, seed=5)

    assert first == second


def test_get_bc_energies_missing_parameter() -> None:
    """Test the bc_energies tool without n."""
    result = get_bc_energies(theta=0.3, n=None)

    assert result["status"] == "error"
    assert result["error"]["code"] == ErrorCode.MISSING_PARAMETER


def test_get_bc_energies_coarse_grid() -> None:
    """Test the bc_energies tool on a grid below the solver minimum."""
    result = get_bc_energies(theta=0.5, n=2)

    assert result["status"] == "error"
    assert result["error"]["code"] == ErrorCode.PRECONDITION_VIOLATED
