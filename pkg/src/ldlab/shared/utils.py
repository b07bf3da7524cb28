"""
Utility functions for ldlab.
Contains input validators, the flat key = value configuration parser and the
float formatting used by every emitted file.
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ldlab.shared.data_types import ErrorCode, LdlabError


def validate_positive(name: str, value: float) -> Tuple[bool, Optional[LdlabError]]:
    """
    Validate that a scalar parameter is finite and strictly positive.

    Args:
        name: Parameter name used in the error message.
        value: The value to validate.

    Returns:
        A tuple of (is_valid, error) where error is None if valid.
    """
    if value is None:
        return False, LdlabError(ErrorCode.MISSING_PARAMETER, f"Parameter '{name}' is required.")
    try:
        number = float(value)
    except (TypeError, ValueError):
        return False, LdlabError(ErrorCode.INVALID_INPUT, f"Parameter '{name}' must be a number, got {value!r}.")
    if not math.isfinite(number) or number <= 0.0:
        return False, LdlabError(ErrorCode.INVALID_INPUT, f"Parameter '{name}' must be positive, got {value!r}.")
    return True, None


def validate_fraction(name: str, value: float, lower_open: bool = False,
                      upper: float = 1.0) -> Tuple[bool, Optional[LdlabError]]:
    """
    Validate that a volume fraction lies in [0, upper] (or (0, upper] when lower_open).

    Args:
        name: Parameter name used in the error message.
        value: The value to validate.
        lower_open: Exclude zero.
        upper: Inclusive upper limit.

    Returns:
        A tuple of (is_valid, error) where error is None if valid.
    """
    if value is None:
        return False, LdlabError(ErrorCode.MISSING_PARAMETER, f"Parameter '{name}' is required.")
    try:
        number = float(value)
    except (TypeError, ValueError):
        return False, LdlabError(ErrorCode.INVALID_INPUT, f"Parameter '{name}' must be a number, got {value!r}.")
    too_low = number <= 0.0 if lower_open else number < 0.0
    if not math.isfinite(number) or too_low or number > upper:
        interval = f"(0, {upper}]" if lower_open else f"[0, {upper}]"
        return False, LdlabError(ErrorCode.INVALID_INPUT, f"Parameter '{name}' must lie in {interval}, got {value!r}.")
    return True, None


def validate_vector3(name: str, value: Sequence[float]) -> Tuple[bool, Optional[LdlabError]]:
    """
    Validate that a value is a finite 3-vector.

    Returns:
        A tuple of (is_valid, error) where error is None if valid.
    """
    if value is None:
        return False, LdlabError(ErrorCode.MISSING_PARAMETER, f"Parameter '{name}' is required.")
    array = np.asarray(value, dtype=float)
    if array.shape[-1:] != (3,) or not np.all(np.isfinite(array)):
        return False, LdlabError(ErrorCode.INVALID_INPUT, f"Parameter '{name}' must be a finite 3-vector, got {value!r}.")
    return True, None


def ensure(check: Tuple[bool, Optional[LdlabError]]) -> None:
    """Raise the error carried by a validator result, if any."""
    is_valid, error = check
    if not is_valid:
        raise error


def parse_key_value_text(text: str) -> Dict[str, str]:
    """
    Parse a flat 'key = value' configuration text.

    Blank lines and '#' comments are ignored; keys are normalized to
    lower case with dashes mapped to underscores.

    Args:
        text: The configuration file content.

    Returns:
        An ordered dictionary of raw string values.

    Raises:
        LdlabError: CONFIG_ERROR on a line without '=' or a repeated key.
    """
    entries: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise LdlabError(ErrorCode.CONFIG_ERROR, f"Line {number}: expected 'key = value', got {raw.strip()!r}.")
        key, value = (part.strip() for part in line.split("=", 1))
        key = normalize_key(key)
        if not key:
            raise LdlabError(ErrorCode.CONFIG_ERROR, f"Line {number}: empty key.")
        if key in entries:
            raise LdlabError(ErrorCode.CONFIG_ERROR, f"Line {number}: key '{key}' given twice.")
        entries[key] = value
    return entries


def parse_cli_overrides(arguments: List[str]) -> Dict[str, str]:
    """
    Parse '--key value' pairs left over by argparse.

    Args:
        arguments: Remaining command-line tokens.

    Returns:
        A dictionary of raw string values.

    Raises:
        LdlabError: CONFIG_ERROR on a dangling key or a bare value.
    """
    overrides: Dict[str, str] = {}
    index = 0
    while index < len(arguments):
        token = arguments[index]
        if not token.startswith("--") or len(token) <= 2:
            raise LdlabError(ErrorCode.CONFIG_ERROR, f"Unexpected argument {token!r}; overrides are '--key value'.")
        if "=" in token:
            key, value = token[2:].split("=", 1)
            index += 1
        else:
            if index + 1 >= len(arguments):
                raise LdlabError(ErrorCode.CONFIG_ERROR, f"Override {token!r} has no value.")
            key, value = token[2:], arguments[index + 1]
            index += 2
        overrides[normalize_key(key)] = value
    return overrides


def normalize_key(key: str) -> str:
    """Lower-case a configuration key and map dashes to underscores."""
    return key.strip().lower().replace("-", "_")


def parse_float_list(text: str) -> List[float]:
    """
    Parse a comma-separated list of floats.

    Raises:
        LdlabError: CONFIG_ERROR if any item is not a number.
    """
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(float(item))
        except ValueError:
            raise LdlabError(ErrorCode.CONFIG_ERROR, f"Not a number in list: {item!r}.")
    return values


def format_float(value: float) -> str:
    """
    Format a float with its shortest round-trip representation.

    Identical doubles always produce identical text, which keeps emitted
    CSV files byte-reproducible.
    """
    return repr(float(value))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Least-squares slope of log|y| against log x.

    Returns:
        The fitted slope, or NaN with fewer than two usable points.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.abs(np.asarray(y, dtype=float))
    mask = (xs > 0) & (ys > 0) & np.isfinite(ys)
    if np.count_nonzero(mask) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(xs[mask]), np.log(ys[mask]), 1)
    return float(slope)
