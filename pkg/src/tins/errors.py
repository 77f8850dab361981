"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems are usage
errors (exit 1), broken or inconsistent input files are data errors
(exit 2).
"""


class TinsError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(TinsError):
    """Invalid configuration value or combination."""


class DataError(TinsError):
    """Malformed, truncated, or internally inconsistent data file."""
