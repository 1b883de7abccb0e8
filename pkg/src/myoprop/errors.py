"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: usage/config problems -> 1,
data and training problems -> 2, numerical failures -> 3.
"""


class MyopropError(Exception):
    """Base class for all package errors."""


class ConfigError(MyopropError, ValueError):
    """Invalid parameter or configuration value."""


class DimensionError(MyopropError, ValueError):
    """Wrong channel count or mismatched vector dimensions."""


class InputError(MyopropError, ValueError):
    """Non-finite or otherwise unusable input values."""


class ValidationError(MyopropError, ValueError):
    """A dataset violates one of its structural invariants."""


class DataError(MyopropError, ValueError):
    """Malformed file content. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingError(MyopropError, ValueError):
    """Training data cannot produce a valid model."""


class CvError(MyopropError, ValueError):
    """Cross-validation cannot be set up on the given data."""


class ReportError(MyopropError, ValueError):
    """Aggregation over an empty or invalid set of outcomes."""


class NumericError(MyopropError, ArithmeticError):
    """Singular matrices, non-convergent iterations and similar."""
