"""
Data types for ldlab.
Contains the error code enumeration, the library error type and the response
builders used by the MCP tools.
"""

from enum import Enum
from typing import Dict, Any


class ErrorCode(str, Enum):
    """
    Error codes for ldlab.
    Used to indicate the type of failure raised by a library operation or reported by a tool.
    """
    INVALID_INPUT = "INVALID_INPUT"  # Malformed argument (wrong shape, wrong type, out of range)
    MISSING_PARAMETER = "MISSING_PARAMETER"  # Required parameter missing
    EMPTY_SET = "EMPTY_SET"  # Operation needs a nonempty voxel set
    SINGULAR_INPUT = "SINGULAR_INPUT"  # Kernel evaluated at the origin
    NONPOSITIVE_RATE = "NONPOSITIVE_RATE"  # Yukawa mass omega <= 0
    PRECONDITION_VIOLATED = "PRECONDITION_VIOLATED"  # Documented precondition does not hold
    GRID_MISMATCH = "GRID_MISMATCH"  # Length is not a multiple of the voxel pitch, or grids disagree
    NEUTRALITY_VIOLATION = "NEUTRALITY_VIOLATION"  # |set| differs from theta * L^3 by more than one voxel
    NONZERO_MEAN = "NONZERO_MEAN"  # Neumann/periodic right-hand side is not mean free
    SOLVER_NON_CONVERGENCE = "SOLVER_NON_CONVERGENCE"  # Poisson residual above the contract
    DETERMINANT_CONSTRAINT = "DETERMINANT_CONSTRAINT"  # lambda_1 * lambda_2 * lambda_3 != 1
    TEMPLATE_NOT_SUPPORTED = "TEMPLATE_NOT_SUPPORTED"  # Lattice template kind unsupported by the evaluator
    NO_ROOT_IN_BRACKET = "NO_ROOT_IN_BRACKET"  # Cubic has no sign change on [1/2, 3/2]
    CONTAINMENT_FAILURE = "CONTAINMENT_FAILURE"  # Shape or set escapes its enclosing box
    THRESHOLD_VIOLATION = "THRESHOLD_VIOLATION"  # Scale threshold (theta^(1/3) L, eta_0) not met
    CONFIG_ERROR = "CONFIG_ERROR"  # Invalid sweep configuration
    OUTPUT_ERROR = "OUTPUT_ERROR"  # Output directory or file not writable
    EMPTY_GRID = "EMPTY_GRID"  # Empty list of sweep points or batch items
    INTERNAL_ERROR = "INTERNAL_ERROR"  # Unhandled exception


class LdlabError(Exception):
    """Failure of an ldlab operation, tagged with an ErrorCode."""

    def __init__(self, code: ErrorCode, message: str):
        super().__init__(message)
        self.code = code
        self.message = message

    def to_dict(self) -> Dict[str, str]:
        """Wire form {"code", "message"} used in tool responses and reports."""
        return {"code": self.code, "message": self.message}


def _response(tool_name: str, status: str, key: str, payload: Dict[str, Any]) -> Dict[str, Any]:
    return {"tool_name": tool_name, "status": status, key: payload}


def create_success_response(tool_name: str, result: Dict[str, Any]) -> Dict[str, Any]:
    """Response of a tool call that completed: {"tool_name", "status": "success", "result"}."""
    return _response(tool_name, "success", "result", result)


def create_error_response(tool_name: str, error: LdlabError) -> Dict[str, Any]:
    """Response of a tool call that failed as a whole: {"tool_name", "status": "error", "error"}."""
    return _response(tool_name, "error", "error", error.to_dict())


def create_partial_success_response(tool_name: str, result: Dict[str, Any]) -> Dict[str, Any]:
    """Response of a batch in which some items failed; the failures are listed inside result."""
    return _response(tool_name, "partial_success", "result", result)


def create_batch_response(tool_name: str, result: Dict[str, Any], success_count: int,
                          error_count: int) -> Dict[str, Any]:
    """
    Response of a batch tool from its per-item counts.

    A batch where every item failed keeps its per-item results under "result"
    but carries status "error".
    """
    if error_count == 0:
        return create_success_response(tool_name, result)
    if success_count > 0:
        return create_partial_success_response(tool_name, result)
    return _response(tool_name, "error", "result", result)
