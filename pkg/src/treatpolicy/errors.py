"""Exception types shared across the package.

The CLI maps these onto exit codes: config problems exit 2, schema and
data problems exit 3, anything else raised by a stage exits 4.
"""

from __future__ import annotations


class TreatPolicyError(Exception):
    """Base class for all package errors."""


class ConfigError(TreatPolicyError):
    """Malformed or invalid pipeline configuration."""


class SchemaError(TreatPolicyError):
    """Input table violates the declared schema."""


class DataError(TreatPolicyError):
    """Data fails a precondition (empty arm, single class, empty split, ...)."""


class ConvergenceError(TreatPolicyError):
    """Iterative fit did not converge within its iteration cap.

    Carries the last iterate and the residual gap so callers can inspect how
    far the solver got.
    """

    def __init__(self, message: str, last_model=None, gap: float | None = None):
        super().__init__(message)
        self.last_model = last_model
        self.gap = gap


class EstimationError(TreatPolicyError):
    """A value estimator is degenerate on the given rows (e.g. zero matched weight)."""


class StageError(TreatPolicyError):
    """A pipeline stage could not run (missing upstream artifact, internal failure)."""
