"""
Exception hierarchy and exit-code mapping for the pipeline.

Every failure a user can fix (bad input files, out-of-range settings, an
index built with a different preprocessing configuration) is raised as a
subclass of `UserFacingError` and ends the process with exit code 1. Anything
else is an internal error and ends with exit code 2. The handler registered
by `register_error_handlers` logs each failure exactly once, with structured
context, before converting it to the exit code.
"""
import logging
from functools import wraps

import click

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INTERNAL_ERROR = 2


class ConvSearchError(Exception):
    """Base class for all errors raised deliberately by the package."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context # Structured details merged into the log record.


class UserFacingError(ConvSearchError):
    """Errors caused by inputs or settings; exit code 1."""


class InputError(UserFacingError):
    """Malformed input file, invalid offsets, duplicate or unknown ids."""


class ConfigurationError(UserFacingError):
    """Invalid, unknown or out-of-range configuration values."""


class IndexMismatchError(UserFacingError):
    """Index format version or preprocessing signature does not match the query pipeline."""


class TrainingError(ConvSearchError):
    """Training diverged (non-finite loss); exit code 2."""


def exit_code_for(error):
    """
    Maps an exception to the documented process exit code.

    Args:
        error (BaseException): The exception that terminated a command.

    Returns:
        int: 1 for user-facing errors (including click usage errors), 2 otherwise.
    """
    if isinstance(error, (UserFacingError, click.UsageError)):
        return EXIT_INPUT_ERROR
    return EXIT_INTERNAL_ERROR


def log_error(error, command_name=None):
    """
    Logs a failure with structured context.

    User-facing errors are logged at WARNING without a stack trace (the
    message is the diagnostic); internal errors are logged with the trace.
    """
    extra = {
        'error_type': type(error).__name__,
        'error_details': str(error),
        'command': command_name,
    }
    if isinstance(error, ConvSearchError):
        extra.update({f"ctx_{key}": value for key, value in error.context.items()})

    if isinstance(error, (UserFacingError, click.UsageError)):
        logger.warning("Command failed due to invalid input or configuration.", extra=extra)
    else:
        logger.exception("Unhandled internal error.", extra=extra)


def register_error_handlers(cli_group):
    """
    Wraps a click group's `main` so that failures become logged exit codes.

    Click's own standalone handling is disabled so that every exception
    passes through `log_error` and `exit_code_for`.

    Args:
        cli_group (click.Group): The top-level command group.

    Returns:
        callable: A `main(args=None)` function returning the exit code.
    """
    @wraps(cli_group.main)
    def main(args=None, prog_name=None):
        try:
            cli_group.main(args=args, prog_name=prog_name, standalone_mode=False)
        except click.exceptions.Exit as exit_signal: # --help, --version
            return exit_signal.exit_code
        except click.exceptions.Abort:
            logger.warning("Command aborted by user.")
            return EXIT_INTERNAL_ERROR
        except click.ClickException as e:
            e.show()
            log_error(e)
            return exit_code_for(e)
        except Exception as e:
            log_error(e, command_name=getattr(e, 'command_name', None))
            return exit_code_for(e)
        return EXIT_OK

    logger.debug("Error handlers registered on CLI group.")
    return main
