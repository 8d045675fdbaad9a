"""
Custom decorators for click command functions.

`handle_command_exceptions` gives every command the same failure behavior:
the exception is annotated with the command name and its non-path parameters
and re-raised, so the top-level handler from `convsearch.error` can log it
once with that context and map it to an exit code.
"""
import logging
from functools import wraps

logger = logging.getLogger(__name__)


def handle_command_exceptions(logger_param=None):
    """
    Decorator for robust exception handling in click commands.

    Args:
        logger_param (logging.Logger, optional): Logger used for the debug
            trace of the failure. Defaults to this module's logger.

    Returns:
        callable: The decorator.
    """
    def decorator(f):
        @wraps(f)
        def decorated_function(*args, **kwargs):
            actual_logger = logger_param if logger_param else logger
            try:
                return f(*args, **kwargs)
            except Exception as e:
                log_extra_context = {'command': f.__name__}
                # Scalar parameters only; config objects and file handles are noise here.
                for key, value in kwargs.items():
                    if isinstance(value, (str, int, float, bool)) or value is None:
                        log_extra_context[f"param_{key}"] = value
                actual_logger.debug(f"Command '{f.__name__}' failed: {e}", extra=log_extra_context)
                e.command_name = f.__name__
                raise
        return decorated_function
    return decorator
