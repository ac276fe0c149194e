"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes, so keep the split between
data problems and numeric/runtime problems meaningful.
"""


class FraudAdvError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(FraudAdvError, ValueError):
    """Invalid configuration or argument value (usage error)."""


class DataError(FraudAdvError, ValueError):
    """Malformed, missing or degenerate input data."""


class NumericError(FraudAdvError, ArithmeticError):
    """Training or attack produced non-finite numbers."""


class AttackError(FraudAdvError, RuntimeError):
    """An attack or transfer evaluation has nothing to work on."""
