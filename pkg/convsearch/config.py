"""
Pipeline configuration.

Settings are resolved in three layers, later layers winning:

1. Defaults from `convsearch.settings_loader.DEFAULT_SETTINGS`.
2. A plain-text `key=value` file (parsed with python-dotenv, without
   interpolation and without touching `os.environ`), then environment
   variables named `CONVSEARCH_<KEY>`.
3. Command-line overrides.

Every raw value is coerced to the type declared in the schema and checked
against its documented range; unknown keys are rejected so that a typo in an
experiment manifest cannot silently fall back to a default.
"""
import os
import logging

from dotenv import dotenv_values

from convsearch.error import ConfigurationError
from convsearch.settings_loader import DEFAULT_SETTINGS

logger = logging.getLogger(__name__)

ENV_PREFIX = "CONVSEARCH_"
CONFIG_FILE_ENV = ENV_PREFIX + "CONFIG"

_TRUE_STRINGS = {'1', 'true', 'yes', 'on'}
_FALSE_STRINGS = {'0', 'false', 'no', 'off', ''}


def _coerce(key, raw):
    """Converts one raw value to the schema type of `key`."""
    schema = DEFAULT_SETTINGS[key]
    kind = schema['type']
    if raw is None:
        return None
    try:
        if kind == 'int':
            value = int(raw)
        elif kind == 'float':
            value = float(raw)
        elif kind == 'bool':
            if isinstance(raw, bool):
                value = raw
            elif str(raw).strip().lower() in _TRUE_STRINGS:
                value = True
            elif str(raw).strip().lower() in _FALSE_STRINGS:
                value = False
            else:
                raise ValueError(f"not a boolean: {raw!r}")
        elif kind == 'path':
            value = str(raw).strip() or None
        else: # 'str' and 'choice'
            value = str(raw).strip()
    except (TypeError, ValueError) as e:
        raise ConfigurationError(
            f"Setting '{key}' expects type {kind}, got {raw!r}.", key=key, value=str(raw)
        ) from e
    return value


def _check_range(key, value):
    """Raises ConfigurationError when `value` violates the bounds declared for `key`."""
    schema = DEFAULT_SETTINGS[key]
    if value is None:
        return
    if schema['type'] == 'choice' and value not in schema['options']:
        raise ConfigurationError(
            f"Setting '{key}' must be one of {schema['options']}, got {value!r}.", key=key
        )
    if schema['type'] not in ('int', 'float'):
        return
    if 'min' in schema and value < schema['min']:
        raise ConfigurationError(f"Setting '{key}' must be >= {schema['min']}, got {value}.", key=key)
    if 'max' in schema and value > schema['max']:
        raise ConfigurationError(f"Setting '{key}' must be <= {schema['max']}, got {value}.", key=key)
    if 'exclusive_min' in schema and value <= schema['exclusive_min']:
        raise ConfigurationError(f"Setting '{key}' must be > {schema['exclusive_min']}, got {value}.", key=key)
    if 'exclusive_max' in schema and value >= schema['exclusive_max']:
        raise ConfigurationError(f"Setting '{key}' must be < {schema['exclusive_max']}, got {value}.", key=key)


class PipelineConfig:
    """
    Resolved, validated settings for one command invocation.

    Values are exposed as attributes (`config.mu`, `config.tau`, ...).
    Instances are treated as immutable once built.
    """

    def __init__(self, values, sources=None):
        unknown = sorted(set(values) - set(DEFAULT_SETTINGS))
        if unknown:
            raise ConfigurationError(f"Unknown setting(s): {', '.join(unknown)}.", keys=unknown)
        resolved = {key: schema['default'] for key, schema in DEFAULT_SETTINGS.items()}
        for key, raw in values.items():
            resolved[key] = _coerce(key, raw)
        for key, value in resolved.items():
            _check_range(key, value)
        if resolved['embed_dim'] % resolved['heads'] != 0:
            raise ConfigurationError(
                f"embed_dim ({resolved['embed_dim']}) must be divisible by heads ({resolved['heads']}).",
                key='embed_dim'
            )
        object.__setattr__(self, '_values', resolved)
        object.__setattr__(self, '_sources', dict(sources or {}))

    def __getattr__(self, name):
        values = object.__getattribute__(self, '_values')
        if name in values:
            return values[name]
        raise AttributeError(name)

    def __setattr__(self, name, value):
        raise AttributeError("PipelineConfig is immutable; use replace().")

    def replace(self, **changes):
        """Returns a new config with `changes` applied on top of the current values."""
        merged = dict(self._values)
        merged.update(changes)
        sources = dict(self._sources)
        sources.update({key: 'override' for key in changes})
        return PipelineConfig(merged, sources)

    def as_dict(self):
        """All resolved settings, sorted by key (used in report headers)."""
        return {key: self._values[key] for key in sorted(self._values)}

    def source_of(self, key):
        """Where a value came from: 'default', 'file', 'env' or 'override'."""
        return self._sources.get(key, 'default')

    def variant_list(self):
        """The comma-separated `variants` setting as a validated list."""
        from convsearch.settings_loader import RESOLVER_VARIANTS
        variants = [v.strip() for v in self.variants.split(',') if v.strip()]
        for variant in variants:
            if variant not in RESOLVER_VARIANTS:
                raise ConfigurationError(f"Unknown resolver variant '{variant}'.", key='variants')
        if not variants:
            raise ConfigurationError("Setting 'variants' lists no resolver variant.", key='variants')
        return variants

    def validate(self, required=()):
        """
        Checks that every path named in `required` is configured and exists.

        Args:
            required (iterable of str): Setting keys of type 'path' needed by
                the calling command.

        Raises:
            ConfigurationError: If a required path is unset or missing on disk.
        """
        for key in required:
            value = self._values.get(key)
            if not value:
                raise ConfigurationError(f"Setting '{key}' is required for this command.", key=key)
            if not os.path.exists(value):
                raise ConfigurationError(f"Path for '{key}' does not exist: {value}", key=key, path=value)
        return self


def load_config(config_file=None, overrides=None, environ=None):
    """
    Builds a PipelineConfig from file, environment and overrides.

    Args:
        config_file (str, optional): Path to a `key=value` file.
        overrides (dict, optional): Command-line values; entries that are
            None are ignored so unset flags never mask file values.
        environ (mapping, optional): Environment to read `CONVSEARCH_*`
            variables from. Defaults to `os.environ`.

    Returns:
        PipelineConfig: The resolved configuration.

    Raises:
        ConfigurationError: Missing config file, unknown keys, bad values.
    """
    values, sources = {}, {}

    if config_file:
        if not os.path.isfile(config_file):
            raise ConfigurationError(f"Config file not found: {config_file}", path=config_file)
        file_values = dotenv_values(config_file, interpolate=False)
        # Relative paths in a config file are resolved against the file's directory.
        base_dir = os.path.dirname(os.path.abspath(config_file))
        for key, raw in file_values.items():
            key = key.strip().lower()
            if key in DEFAULT_SETTINGS and DEFAULT_SETTINGS[key]['type'] == 'path' and raw:
                raw = raw if os.path.isabs(raw) else os.path.join(base_dir, raw)
            values[key] = raw
            sources[key] = 'file'
        logger.debug("Loaded configuration file.", extra={'path': config_file, 'keys': sorted(file_values)})

    environ = os.environ if environ is None else environ
    for name, raw in environ.items():
        if name.startswith(ENV_PREFIX) and name != CONFIG_FILE_ENV: # The file path, not a setting.
            key = name[len(ENV_PREFIX):].lower()
            values[key] = raw
            sources[key] = 'env'

    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        values[key] = raw
        sources[key] = 'override'

    return PipelineConfig(values, sources)
