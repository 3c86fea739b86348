"""
Exception hierarchy. Everything derives from ValueError so callers that only catch ValueError keep working.
"""


class MoEScalingError(ValueError):
    """Root of all moeScaling domain errors."""


class ConfigError(MoEScalingError):
    """Invalid architecture, request, or coefficient values."""


class SchemaError(MoEScalingError):
    """A JSON document does not match its schema."""


class DomainError(MoEScalingError):
    """Input outside the mathematical domain of a law (S = 1, C <= 0, r < 0)."""


class FitError(MoEScalingError):
    """Degenerate data or a fit that produced no usable result."""


class BracketError(MoEScalingError):
    """The allocation oracle could not bracket a minimum."""


class SelectionError(MoEScalingError):
    """Sweep groups are unsorted or contain duplicate ratios."""
