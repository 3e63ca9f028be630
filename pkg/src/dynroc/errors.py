"""Exception types shared across the package."""


class DynrocError(Exception):
    """Base class for all errors raised by dynroc."""


class SchemaError(DynrocError):
    """A CSV file violates the expected schema (bad header, bad field, bad reference)."""


class CohortError(DynrocError):
    """A cohort-level precondition failed (empty cohort, empty series, ...)."""


class FitError(DynrocError):
    """Model fitting failed."""


class RankDeficiencyError(FitError):
    """The design matrix is rank deficient after centering."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"design matrix is rank deficient: column '{column}' carries no information")


class SeparationError(FitError):
    """The partial likelihood is monotone in some coefficient (complete separation)."""


class ConvergenceError(FitError):
    """Newton iterations did not converge within the iteration budget."""


class EvaluationError(DynrocError):
    """An accuracy evaluation could not be carried out."""
