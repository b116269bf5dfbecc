"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4, PropertyViolationError -> 5.
"""


class MixiqaError(Exception):
    """Base class for all package errors."""


class ConfigError(MixiqaError):
    """Invalid configuration: bad hyper-parameters, unknown keys, unsupported depth."""


class DataError(MixiqaError):
    """Invalid or missing data: manifests, feature files, checkpoints."""


class DimensionError(DataError):
    """Shapes that do not conform (always names both shapes in the message)."""


class BadMagicError(DataError):
    """Binary file does not start with the expected magic bytes."""


class BadVersionError(DataError):
    """Binary file carries an unsupported format version."""


class TruncatedPayloadError(DataError):
    """Binary payload is shorter than its header declares."""


class ValidationError(DataError):
    """A record or manifest violates a documented invariant."""


class NumericError(MixiqaError):
    """Non-finite values where finite ones are required."""


class NonFiniteError(NumericError):
    """NaN or Inf encountered in data or during a loss evaluation."""


class UndefinedCorrelationError(NumericError):
    """Correlation requested on degenerate input (n < 2 or zero variance)."""


class PropertyViolationError(MixiqaError):
    """A verified model property (positivity, monotonicity) does not hold."""
