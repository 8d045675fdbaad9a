"""
Helpers shared by all commands: settings resolution and start-of-command logging.
"""
import logging

import click

from convsearch import configure_logging
from convsearch.config import load_config
from utils.files import input_hashes

logger = logging.getLogger('convsearch.commands')

INPUT_SETTINGS = ('corpus', 'topics', 'qrels', 'index_dir', 'model')


def command_config(ctx, command_name, required=(), **overrides):
    """
    Resolves settings for one command and logs them with input hashes.

    Args:
        ctx (click.Context): Carries the group's --config and --log-level.
        command_name (str): For the log record.
        required (tuple of str): Path settings that must exist.
        **overrides: Command-line values keyed by setting name (None = unset).

    Returns:
        PipelineConfig: Validated settings.
    """
    obj = ctx.obj or {}
    overrides = dict(overrides)
    overrides.setdefault('log_level', obj.get('log_level'))
    config = load_config(obj.get('config_file'), overrides)
    configure_logging(config.log_level)
    config.validate(required)

    inputs = {key: getattr(config, key) for key in INPUT_SETTINGS}
    logger.info(
        "Starting command.",
        extra={'command': command_name, 'config': config.as_dict(), 'input_sha256': input_hashes(inputs)}
    )
    return config


def input_paths(config, keys=INPUT_SETTINGS):
    return {key: getattr(config, key) for key in keys}


def tag_option(default):
    return click.option('--tag', default=default, show_default=True, help='Run tag written in the last column.')
