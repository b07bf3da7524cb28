"""
Module containing the optimize_certificate and batch_certificates tools.
These tools compute optimized lower-bound certificates for one or several background densities.
"""

import logging
from typing import Dict, Any, List, Optional

from ldlab.numerics.energy import ReferenceConstants
from ldlab.numerics.lowerbound import linearized_certificate_value, linearized_schedule, optimize_certificate
from ldlab.shared.data_types import (
    LdlabError, ErrorCode, create_batch_response, create_error_response, create_success_response,
)

logger = logging.getLogger("ldlab")


def _reference(e_star: Optional[float]) -> ReferenceConstants:
    refs = ReferenceConstants.ball_ansatz()
    return refs if e_star is None else refs.with_e_star(float(e_star))


def _failed(theta: Any, error: LdlabError) -> Dict[str, Any]:
    return {"theta": theta, "status": "error", "error": error.to_dict()}


def _certificate_result(theta: float, e_star: Optional[float]) -> Dict[str, Any]:
    refs = _reference(e_star)
    cert = optimize_certificate(float(theta), refs.eStar)
    omega, R = linearized_schedule(float(theta), refs.eStar)
    result = cert.to_dict()
    result["deficit"] = cert.deficit
    result["e_star_label"] = refs.label
    result["linearized"] = {
        "omega": omega,
        "R": R,
        "value": linearized_certificate_value(float(theta), omega, R, refs.eStar),
    }
    return result


def get_certificate(theta: float, e_star: Optional[float] = None) -> Dict[str, Any]:
    """
    Optimize the lower-bound certificate (omega, R) for one background density.

    Args:
        theta: Background density in (0, 1].
        e_star: Reference energy per volume; the ball ansatz if omitted.

    Returns:
        A dictionary with the tool response: the refined certificate, the
        starting schedule and the linearized optimum.
    """
    tool_name = "optimize_certificate"
    logger.info(f"{tool_name} called with theta={theta}, e_star={e_star}")

    if theta is None:
        return create_error_response(
            tool_name,
            LdlabError(ErrorCode.MISSING_PARAMETER, "Required parameter 'theta' is missing")
        )

    try:
        return create_success_response(tool_name, _certificate_result(theta, e_star))
    except LdlabError as e:
        logger.error(f"{tool_name} failed: {e.message}")
        return create_error_response(tool_name, e)
    except (TypeError, ValueError) as e:
        return create_error_response(tool_name, LdlabError(ErrorCode.INVALID_INPUT, f"Invalid argument: {str(e)}"))
    except Exception as e:
        logger.error(f"Unexpected error in {tool_name}: {str(e)}")
        return create_error_response(tool_name, LdlabError(ErrorCode.INTERNAL_ERROR, f"Exception: {str(e)}"))


def batch_certificates(requests: List[Dict[str, Any]]) -> Dict[str, Any]:
    """
    Optimize certificates for several background densities in a single batch call.

    Args:
        requests: A list of request objects, each containing:
            - theta (required): Background density in (0, 1]
            - e_star (optional): Reference energy per volume

    Returns:
        A dictionary with the tool response containing one result per request and a summary.
    """
    tool_name = "batch_certificates"
    logger.info(f"{tool_name} called with {len(requests) if isinstance(requests, list) else 0} requests")

    if not isinstance(requests, list):
        logger.error("Invalid input: 'requests' must be an array")
        return create_error_response(
            tool_name,
            LdlabError(ErrorCode.INVALID_INPUT, "Invalid input: 'requests' must be an array")
        )

    if not requests:
        logger.error("Empty requests array provided")
        return create_error_response(
            tool_name,
            LdlabError(ErrorCode.EMPTY_GRID, "Empty requests array provided")
        )

    results = []
    success_count = 0
    for request in requests:
        theta = request.get("theta") if isinstance(request, dict) else str(request)
        try:
            if not isinstance(request, dict):
                raise LdlabError(ErrorCode.INVALID_INPUT, "Request must be an object")
            if theta is None:
                raise LdlabError(ErrorCode.MISSING_PARAMETER, "Required parameter 'theta' is missing")
            results.append({"theta": theta, "status": "success",
                            "result": _certificate_result(theta, request.get("e_star"))})
            success_count += 1
        except LdlabError as e:
            results.append(_failed(theta, e))
        except (TypeError, ValueError) as e:
            results.append(_failed(theta, LdlabError(ErrorCode.INVALID_INPUT, f"Invalid argument: {str(e)}")))
        except Exception as e:
            logger.error(f"Error processing request {request}: {str(e)}")
            results.append(_failed(theta, LdlabError(ErrorCode.INTERNAL_ERROR, f"Exception: {str(e)}")))

    total_count = len(requests)
    error_count = total_count - success_count
    logger.info(f"Batch processing complete. Total: {total_count}, "
                f"Success: {success_count}, Failed: {error_count}")

    result = {
        "certificates": results,
        "summary": {"total": total_count, "success": success_count, "failed": error_count},
    }
    return create_batch_response(tool_name, result, success_count, error_count)
