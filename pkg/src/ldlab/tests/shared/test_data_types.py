"""
Tests for the error type and the response builders.
"""

from ldlab.shared.data_types import (
    ErrorCode, LdlabError, create_batch_response, create_error_response, create_partial_success_response,
    create_success_response,
)


def test_error_to_dict():
    """Test serialization of an error."""
    error = LdlabError(ErrorCode.NO_ROOT_IN_BRACKET, "no sign change")

    assert error.to_dict() == {"code": ErrorCode.NO_ROOT_IN_BRACKET, "message": "no sign change"}
    assert str(error) == "no sign change"


def test_error_codes_are_strings():
    """Test that error codes compare equal to their names."""
    assert ErrorCode.CONFIG_ERROR == "CONFIG_ERROR"
    assert ErrorCode("EMPTY_GRID") is ErrorCode.EMPTY_GRID


def test_response_builders():
    """Test the three response shapes."""
    success = create_success_response("tool", {"value": 1})
    partial = create_partial_success_response("tool", {"value": 2})
    error = create_error_response("tool", LdlabError(ErrorCode.INVALID_INPUT, "bad"))

    assert success == {"tool_name": "tool", "status": "success", "result": {"value": 1}}
    assert partial["status"] == "partial_success"
    assert error["status"] == "error"
    assert error["error"]["code"] == ErrorCode.INVALID_INPUT


def test_batch_response_status_follows_counts():
    """Test success, partial success and all-failed batches."""
    result = {"summary": {"total": 2}}

    assert create_batch_response("tool", result, 2, 0)["status"] == "success"
    assert create_batch_response("tool", result, 1, 1)["status"] == "partial_success"
    failed = create_batch_response("tool", result, 0, 2)
    assert failed == {"tool_name": "tool", "status": "error", "result": result}
