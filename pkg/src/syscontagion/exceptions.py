"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so data/domain problems and internal
numerical inconsistencies stay distinguishable.
"""


class ContagionError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ContagionError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ArgumentError(ContagionError, ValueError):
    """Arguments are individually valid but mutually inconsistent."""


class NestingError(DomainError):
    """Inner Gumbel parameter smaller than the outer one."""


class DegenerateModelError(DomainError):
    """All shock intensities are zero."""


class UndefinedTauError(DomainError):
    """Kendall's tau is undefined (a constant series)."""


class UnfittableError(DomainError):
    """No defined off-diagonal tau to fit against."""


class ExtractionError(DomainError):
    """Systemic intensity cannot be extracted (every entity excluded)."""


class IngestionError(DomainError):
    """Not enough aligned data after ingestion."""


class NumericError(ContagionError, ArithmeticError):
    """A numerical routine failed to converge within its budget."""


class ConsistencyError(NumericError):
    """Two independent evaluation routes disagree beyond tolerance."""


class IdentifiabilityWarning(UserWarning):
    """The parameter vector is not pinned down by the available taus."""
