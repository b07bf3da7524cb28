"""
Module containing the build_competitor tool.
This tool builds the lattice competitor for a background density and box side, and optionally evaluates its energy.
"""

import logging
from typing import Dict, Any, Optional, Sequence

from ldlab.numerics.energy import ReferenceConstants
from ldlab.numerics.upperbound import (
    DEFAULT_NEAR_CUTOFF, build_competitor, check_invariants, decompose_energy, far_field_bound,
)
from ldlab.shared.data_types import LdlabError, ErrorCode, create_success_response, create_error_response

logger = logging.getLogger("ldlab")


def get_lattice_competitor(theta: float, L: float, near_cutoff: int = DEFAULT_NEAR_CUTOFF,
                           offset: Optional[Sequence[float]] = None, evaluate: bool = False,
                           e_star: Optional[float] = None) -> Dict[str, Any]:
    """
    Build the cubic lattice competitor with ball templates.

    Args:
        theta: Background density in (0, 1/2].
        L: Box side with theta^(1/3) L >= 10.
        near_cutoff: Near/far cutoff M.
        offset: Ball center relative to the cell center, in units of the cell side.
        evaluate: Also compute the energy decomposition and the far-field bound.
        e_star: Reference energy per volume; the ball ansatz if omitted.

    Returns:
        A dictionary with the tool response containing the lattice parameters,
        the invariant checks and, when requested, the energy.
    """
    tool_name = "build_competitor"
    logger.info(f"{tool_name} called with theta={theta}, L={L}, near_cutoff={near_cutoff}, evaluate={evaluate}")

    for name, value in (("theta", theta), ("L", L)):
        if value is None:
            return create_error_response(
                tool_name,
                LdlabError(ErrorCode.MISSING_PARAMETER, f"Required parameter '{name}' is missing")
            )

    try:
        refs = ReferenceConstants.ball_ansatz()
        if e_star is not None:
            refs = refs.with_e_star(float(e_star))
        config = build_competitor(float(theta), float(L), refs, int(near_cutoff), tuple(offset or (0.0, 0.0, 0.0)))
        summary = config.to_dict()
        # Cells fill [-K, K]^3, so N determines them.
        summary.pop("cells")
        result = {
            "config": summary,
            "invariants": check_invariants(config),
        }
        if evaluate:
            energy = decompose_energy(config)
            result["energy"] = energy.to_dict()
            result["energy_per_volume"] = energy.total / (config.theta * config.L**3)
            result["e_star"] = refs.eStar
            result["far_field"] = far_field_bound(config).to_dict()
        return create_success_response(tool_name, result)
    except LdlabError as e:
        logger.error(f"{tool_name} failed: {e.message}")
        return create_error_response(tool_name, e)
    except (TypeError, ValueError) as e:
        return create_error_response(tool_name, LdlabError(ErrorCode.INVALID_INPUT, f"Invalid argument: {str(e)}"))
    except Exception as e:
        logger.error(f"Unexpected error in {tool_name}: {str(e)}")
        return create_error_response(tool_name, LdlabError(ErrorCode.INTERNAL_ERROR, f"Exception: {str(e)}"))
