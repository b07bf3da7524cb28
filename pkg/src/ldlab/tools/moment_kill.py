"""
Module containing the moment_kill tool.
This tool fits a rigid motion and a unit-determinant cuboid cell to an ellipsoidal template.
"""

import logging
from typing import Dict, Any, List, Optional, Sequence

import numpy as np

from ldlab.numerics.geometry import ShapeSample
from ldlab.numerics.upperbound import moment_kill
from ldlab.shared.data_types import LdlabError, ErrorCode, create_success_response, create_error_response
from ldlab.shared.utils import ensure, validate_positive, validate_vector3

logger = logging.getLogger("ldlab")


def run_moment_kill(semi_axes: Sequence[float], l0: float, center: Optional[Sequence[float]] = None,
                    rotation: Optional[List[List[float]]] = None) -> Dict[str, Any]:
    """
    Cancel charge, dipole and quadrupole of an ellipsoid against its cuboid cell.

    The background density is fixed by neutrality, theta = |ellipsoid| / l0^3.

    Args:
        semi_axes: The three semi-axes.
        l0: Base cell side; at least 5 ellipsoid diameters.
        center: Ellipsoid center (origin if omitted).
        rotation: 3x3 rotation matrix of the ellipsoid axes (identity if omitted).

    Returns:
        A dictionary with the tool response containing the rigid motion, the
        cell scalings, the cubic data and the moment residuals.
    """
    tool_name = "moment_kill"
    logger.info(f"{tool_name} called with semi_axes={semi_axes}, l0={l0}")

    for name, value in (("semi_axes", semi_axes), ("l0", l0)):
        if value is None:
            return create_error_response(
                tool_name,
                LdlabError(ErrorCode.MISSING_PARAMETER, f"Required parameter '{name}' is missing")
            )

    try:
        ensure(validate_vector3("semi_axes", semi_axes))
        for axis in semi_axes:
            ensure(validate_positive("semi_axes", float(axis)))
        matrix = None
        if rotation is not None:
            matrix = np.asarray(rotation, dtype=float)
            if matrix.shape != (3, 3) or not np.allclose(matrix.T @ matrix, np.eye(3), atol=1e-9):
                raise LdlabError(ErrorCode.INVALID_INPUT, "'rotation' must be an orthogonal 3x3 matrix")
        shape = ShapeSample.ellipsoid([float(a) for a in semi_axes], center or (0.0, 0.0, 0.0), matrix)
        l0 = float(l0)
        ensure(validate_positive("l0", l0))
        kill = moment_kill(shape, l0, shape.volume / l0**3)
        result = kill.to_dict()
        result["verified"] = kill.verified
        result["cell_sides"] = list(kill.cell.l)
        return create_success_response(tool_name, result)
    except LdlabError as e:
        logger.error(f"{tool_name} failed: {e.message}")
        return create_error_response(tool_name, e)
    except (TypeError, ValueError) as e:
        return create_error_response(tool_name, LdlabError(ErrorCode.INVALID_INPUT, f"Invalid argument: {str(e)}"))
    except Exception as e:
        logger.error(f"Unexpected error in {tool_name}: {str(e)}")
        return create_error_response(tool_name, LdlabError(ErrorCode.INTERNAL_ERROR, f"Exception: {str(e)}"))
