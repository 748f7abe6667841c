"""
escl_lab exceptions

Every error raised on purpose by this package derives from EsclError; the
command line maps each family onto its own exit code.
"""
from scrapy.exceptions import NotConfigured


EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class EsclError(Exception):
    """Base class of escl_lab errors."""
    exit_code = EXIT_CONFIG


class ConfigError(EsclError, NotConfigured):
    """Invalid setting, config key or hyperparameter."""
    exit_code = EXIT_CONFIG


class UsageError(ConfigError):
    """Bad command line usage."""


class DataError(EsclError, ValueError):
    """Malformed, empty or otherwise unusable input data."""
    exit_code = EXIT_DATA


class DimensionError(DataError):
    """Shapes, lengths or vocabularies that do not line up."""


class DegenerateInputError(DataError):
    """Zero-norm vectors, constant score lists and the like."""


class NumericError(EsclError, ArithmeticError):
    """Non-finite values, or gradients failing verification."""
    exit_code = EXIT_NUMERIC


def exit_code_for(exc):
    return getattr(exc, 'exit_code', EXIT_CONFIG)
