"""Exception types raised across the toolkit.

All subclass ``ValueError`` (or ``RuntimeError`` for operational failures)
so callers that only care about "bad input" can catch the builtin.
"""


class QuantAuditError(Exception):
    """Base class for package-specific errors."""


class InvalidSpecError(QuantAuditError, ValueError):
    """A domain object (mixture spec, quantizer spec, config) is malformed."""


class InvalidArgumentError(QuantAuditError, ValueError):
    """An operation received arguments outside its contract."""


class ShapeError(QuantAuditError, ValueError):
    """Array dimensions do not compose."""


class DegenerateInputError(QuantAuditError, ValueError):
    """Input is degenerate for the requested operation (e.g. all-zero weights)."""


class DegenerateTrajectoryError(QuantAuditError, ValueError):
    """Too few usable distinct checkpoints to score a trajectory."""


class DegenerateVarianceError(QuantAuditError, ValueError):
    """Every loss-gap comparator has zero variance; the score is undefined."""


class UndefinedCorrelationError(QuantAuditError, ValueError):
    """Rank correlation is undefined (constant input or length < 2)."""


class UndefinedRatioError(QuantAuditError, ValueError):
    """Relative performance against a zero reference metric."""


class EnumerationTooLargeError(QuantAuditError, ValueError):
    """Exact enumeration would exceed the configured size guard."""


class ConfigError(QuantAuditError, ValueError):
    """Experiment configuration failed validation."""


class ArtifactError(QuantAuditError, RuntimeError):
    """Artifact directory state prevents the requested pipeline step."""
