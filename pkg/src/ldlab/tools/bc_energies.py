"""
Module containing the bc_energies tool.
This tool evaluates a random neutral set under the four boundary conditions and reports the energy orderings.
"""

import logging
from typing import Dict, Any, Optional

from ldlab.numerics.energy import ORDERING_TOLERANCE, boundary_energies, ordering_margins
from ldlab.numerics.geometry import filling_fraction, random_neutral_set, volume
from ldlab.shared.data_types import LdlabError, ErrorCode, create_success_response, create_error_response

logger = logging.getLogger("ldlab")


def get_bc_energies(theta: float, n: int, L: Optional[float] = None, seed: int = 0,
                    smoothing: float = 1.5) -> Dict[str, Any]:
    """
    Energies of a seeded random neutral set under Dirichlet, Neumann, periodic and free-space closure.

    Args:
        theta: Background density in [0, 1].
        n: Cells per box side.
        L: Box side; defaults to n.
        seed: Seed of the random set.
        smoothing: Gaussian smoothing of the noise field in cells.

    Returns:
        A dictionary with the tool response containing the energy per boundary
        condition and the relative margin of every ordering.
    """
    tool_name = "bc_energies"
    logger.info(f"{tool_name} called with theta={theta}, n={n}, L={L}, seed={seed}")

    for name, value in (("theta", theta), ("n", n)):
        if value is None:
            return create_error_response(
                tool_name,
                LdlabError(ErrorCode.MISSING_PARAMETER, f"Required parameter '{name}' is missing")
            )

    try:
        n = int(n)
        side = float(n) if L is None else float(L)
        voxels = random_neutral_set(side, n, float(theta), int(seed), float(smoothing))
        realized = filling_fraction(voxels)
        energies = boundary_energies(voxels, realized)
        margins = ordering_margins(energies)
        return create_success_response(tool_name, {
            "theta": float(theta),
            "theta_effective": realized,
            "L": side,
            "n": n,
            "volume": volume(voxels),
            "energies": {bc.value: energy.to_dict() for bc, energy in energies.items()},
            "orderings": margins,
            "orderings_hold": all(margin >= -ORDERING_TOLERANCE for margin in margins.values()),
        })
    except LdlabError as e:
        logger.error(f"{tool_name} failed: {e.message}")
        return create_error_response(tool_name, e)
    except (TypeError, ValueError) as e:
        return create_error_response(tool_name, LdlabError(ErrorCode.INVALID_INPUT, f"Invalid argument: {str(e)}"))
    except Exception as e:
        logger.error(f"Unexpected error in {tool_name}: {str(e)}")
        return create_error_response(tool_name, LdlabError(ErrorCode.INTERNAL_ERROR, f"Exception: {str(e)}"))
