"""
Input validation helpers shared by the readers in `convsearch.trec_io`.

Each helper raises `InputError` with the offending file and line number in
its context, so the user sees exactly which record to fix.
"""
from convsearch.error import InputError


def require_fields(record, fields, path, line_number):
    """
    Checks that a decoded JSON record is an object holding every key in `fields`.

    Args:
        record: The decoded value.
        fields (iterable of str): Required keys.
        path (str): Source file, for the error context.
        line_number (int): 1-based line, for the error context.

    Raises:
        InputError: If the record is not an object or a key is missing.
    """
    if not isinstance(record, dict):
        raise InputError(f"{path}:{line_number}: expected a JSON object.", path=path, line=line_number)
    missing = [field for field in fields if field not in record]
    if missing:
        raise InputError(
            f"{path}:{line_number}: missing field(s) {', '.join(missing)}.",
            path=path, line=line_number, missing=missing
        )


def parse_int(raw, what, path, line_number, minimum=None):
    """Parses an integer field, optionally enforcing a lower bound."""
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise InputError(f"{path}:{line_number}: {what} must be an integer, got {raw!r}.", path=path, line=line_number)
    if minimum is not None and value < minimum:
        raise InputError(f"{path}:{line_number}: {what} must be >= {minimum}, got {value}.", path=path, line=line_number)
    return value


def parse_float(raw, what, path, line_number):
    """Parses a finite float field."""
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise InputError(f"{path}:{line_number}: {what} must be a number, got {raw!r}.", path=path, line=line_number)
    if value != value or value in (float('inf'), float('-inf')):
        raise InputError(f"{path}:{line_number}: {what} must be finite.", path=path, line=line_number)
    return value


def ensure_unique(key, seen, what, path, line_number):
    """Raises InputError when `key` was already seen; otherwise records it."""
    if key in seen:
        raise InputError(f"{path}:{line_number}: duplicate {what} '{key}'.", path=path, line=line_number, key=str(key))
    seen.add(key)
