"""
Settings resolution.

Values are layered with scrapy's settings priorities: package defaults,
then a config file, then command line overrides.
"""
import json
import logging
import os

from scrapy.settings import Settings

from . import default_settings
from .exceptions import ConfigError, DataError


logger = logging.getLogger(__name__)


CONFIG_KEYS = (
    'batch_size',
    'steps',
    'learning_rate',
    'optimizer',
    'adam_beta1',
    'adam_beta2',
    'adam_eps',
    'r_low',
    'r_high',
    'loss.temperature',
    'loss.lambda',
    'loss.variant',
    'seed',
    'eval_every',
    'checkpoint_path',
    'trace_path',
    'embed_dim',
    'output_dim',
    'select_best',
)


def setting_name(key):
    """Map a config key onto its setting name.

    >>> setting_name('loss.lambda')
    'ESCL_LOSS_LAMBDA'
    >>> setting_name('batch_size')
    'ESCL_BATCH_SIZE'

    """
    if key not in CONFIG_KEYS:
        raise ConfigError("Unknown config key: %r" % key)
    return 'ESCL_' + key.replace('.', '_').upper()


def load_config_file(path):
    """Read a flat JSON config file into a key -> value dict."""
    try:
        with open(path, 'rb') as f:
            values = json.loads(f.read().decode('utf-8'))
    except (IOError, OSError) as e:
        raise DataError("Cannot read config file %s: %s" % (path, e))
    except ValueError as e:
        raise ConfigError("Config file %s is not valid JSON: %s" % (path, e))
    if not isinstance(values, dict):
        raise ConfigError("Config file %s must hold a flat JSON object" % path)
    for key, value in values.items():
        setting_name(key)
        if isinstance(value, (dict, list)):
            raise ConfigError("Config key %r in %s must hold a scalar value"
                              % (key, path))
    return values


def get_settings(config_path=None, overrides=None, extra=None):
    """Return resolved Settings.

    ``overrides`` holds config keys (from ``--key value`` flags); ``extra``
    holds raw setting names, both applied with command line priority.
    """
    settings = Settings()
    settings.setmodule(default_settings, priority='default')
    if config_path:
        for key, value in load_config_file(config_path).items():
            settings.set(setting_name(key), value, priority='project')
    for key, value in (overrides or {}).items():
        settings.set(setting_name(key), value, priority='cmdline')
    for name, value in (extra or {}).items():
        settings.set(name, value, priority='cmdline')
    return settings


def resolved_config(settings):
    """Flat key -> value mapping of every config key, as resolved."""
    from .training import TrainConfig
    return TrainConfig.from_settings(settings).to_dict()


def write_provenance(artifact_path, data):
    """Write ``data`` as ``<artifact>.config.json``."""
    path = '%s.config.json' % artifact_path
    dirname = os.path.dirname(os.path.abspath(path))
    try:
        if not os.path.isdir(dirname):
            os.makedirs(dirname)
        with open(path, 'wb') as f:
            f.write(json.dumps(data, sort_keys=True, indent=2).encode('utf-8'))
            f.write(b'\n')
    except (IOError, OSError) as e:
        raise DataError("Cannot write %s: %s" % (path, e))
    logger.debug("Wrote resolved config to %(path)s", {'path': path})
    return path


def write_resolved_config(settings, artifact_path, extra=None):
    """Write the resolved config next to an artifact for provenance."""
    data = resolved_config(settings)
    data.update(extra or {})
    return write_provenance(artifact_path, data)
