"""
Conversational passage retrieval with query resolution by term classification.

This package holds the pipeline modules (preprocessing, supervision, the
resolver model, retrieval, reranking/fusion and evaluation). This module
also owns the structured JSON logging setup shared by every command: records
at DEBUG/INFO go to stdout, WARNING and above go to stderr, and every record
carries the same base fields so that runs can be audited line by line.
"""
import sys
import logging
from pythonjsonlogger import jsonlogger # For structured JSON logging.

__version__ = "1.0.0"

PACKAGE_LOGGER_NAME = "convsearch"


# --- Custom JSON Logging Helper Classes ---
class CustomJsonFormatter(jsonlogger.JsonFormatter):
    """
    Custom JSON log formatter to ensure consistent fields like 'timestamp',
    'level', 'logger_name', and add application-specific default fields.
    """
    def add_fields(self, log_record, record, message_dict):
        super(CustomJsonFormatter, self).add_fields(log_record, record, message_dict)
        if not log_record.get('timestamp'):
            log_record['timestamp'] = record.created  # Unix timestamp (seconds since epoch).
        if not log_record.get('level'):
            log_record['level'] = record.levelname
        if not log_record.get('logger_name'):
            log_record['logger_name'] = record.name

        log_record['application'] = 'convsearch'
        log_record['app_version'] = __version__

class StdoutFilter(logging.Filter):
    """
    A logging filter that allows records with level INFO or lower (DEBUG, INFO)
    to pass through. Intended for directing these logs to STDOUT.
    """
    def filter(self, record):
        return record.levelno <= logging.INFO

class StderrFilter(logging.Filter):
    """
    A logging filter that allows records with level WARNING or higher
    (WARNING, ERROR, CRITICAL) to pass through. Intended for directing
    these logs to STDERR.
    """
    def filter(self, record):
        return record.levelno >= logging.WARNING


def configure_logging(level="INFO"):
    """
    Installs the JSON handlers on the package logger.

    Safe to call more than once (e.g. once per CLI invocation inside a test
    session): existing handlers are replaced rather than stacked.

    Args:
        level (str or int): Minimum level for the package logger.

    Returns:
        logging.Logger: The configured `convsearch` logger.
    """
    logger = logging.getLogger(PACKAGE_LOGGER_NAME)
    for handler in list(logger.handlers): # Iterate over a copy of the list.
        logger.removeHandler(handler)

    json_formatter = CustomJsonFormatter(
        '%(asctime)s %(levelname)s %(name)s %(module)s %(funcName)s %(lineno)d %(message)s'
    )

    # Handler for STDOUT: Logs DEBUG and INFO messages.
    stdout_handler = logging.StreamHandler(sys.stdout)
    stdout_handler.setFormatter(json_formatter)
    stdout_handler.addFilter(StdoutFilter())
    stdout_handler.setLevel(logging.DEBUG)

    # Handler for STDERR: Logs WARNING, ERROR, and CRITICAL messages.
    stderr_handler = logging.StreamHandler(sys.stderr)
    stderr_handler.setFormatter(json_formatter)
    stderr_handler.addFilter(StderrFilter())
    stderr_handler.setLevel(logging.WARNING)

    logger.addHandler(stdout_handler)
    logger.addHandler(stderr_handler)
    logger.setLevel(level if isinstance(level, int) else str(level).upper())
    logger.propagate = False # Keep records out of the root logger, avoiding duplicates.

    logger.debug("Package logging configured for JSON output to stdout/stderr.")
    return logger


def create_cli():
    """
    CLI factory: builds the `convsearch` click group with every command registered.

    Returns:
        callable: `main(args=None)` returning the process exit code
        (0 success, 1 invalid input or configuration, 2 internal error).
    """
    import click
    from commands import commands # Imported here to avoid circular imports at package load.
    from convsearch.config import CONFIG_FILE_ENV
    from convsearch.error import register_error_handlers

    @click.group()
    @click.version_option(__version__, prog_name='convsearch')
    @click.option('--config', 'config_file', type=click.Path(), envvar=CONFIG_FILE_ENV,
                  help='key=value settings file.')
    @click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
                  help='Overrides the log_level setting.')
    @click.pass_context
    def cli(ctx, config_file, log_level):
        """Conversational passage retrieval with query resolution."""
        configure_logging(log_level or "INFO")
        ctx.ensure_object(dict)
        ctx.obj['config_file'] = config_file
        ctx.obj['log_level'] = log_level.upper() if log_level else None

    for command in commands:
        cli.add_command(command)

    return register_error_handlers(cli)
