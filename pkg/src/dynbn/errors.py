"""Shared exception types mapped onto CLI exit codes."""


class ConfigError(Exception):
    """Bad run configuration (exit code 2)."""


class NumericError(Exception):
    """Numerical failure in a model computation (exit code 3)."""


class DataError(Exception):
    """Malformed input data (exit code 4)."""
