"""Exception hierarchy shared by the library and the CLI exit-code mapping."""

from __future__ import annotations


class BunchkitError(Exception):
    """Base class for all library errors."""


class DataValidationError(BunchkitError, ValueError):
    """Input data violates the paycheck schema or a table invariant."""

    def __init__(self, message: str, row: int | None = None, field: str | None = None):
        self.row = row
        self.field = field
        where = []
        if row is not None:
            where.append(f"row {row}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class EmptySampleError(DataValidationError):
    """No rows left to analyse (empty file or everything filtered out)."""


class EstimationError(BunchkitError, ValueError):
    """An estimator cannot produce a value on the given data."""


class InsufficientSupportError(EstimationError):
    """Too few observations in a kernel window or on one side of the kink."""


class SingularDesignError(EstimationError):
    """The weighted least-squares design matrix is rank deficient."""


class PreconditionError(EstimationError):
    """Inputs are individually valid but jointly inconsistent (e.g. p > B)."""


class FeasibilityError(EstimationError):
    """Estimates contradict bi-log-concavity; names the failing argument."""

    def __init__(self, message: str, argument: str):
        self.argument = argument
        super().__init__(f"{argument}: {message}")


class DomainError(BunchkitError, ValueError):
    """A closed-form function was evaluated outside its domain."""
