"""Exception and warning classes shared across the toolkit.

Validation problems derive from :class:`ValidationError` and fitting problems
from :class:`FitError`; the command-line front end maps the two families to
distinct exit codes.
"""


class QcharError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(QcharError):
    """Input document or dataset failed validation."""


class SchemaError(ValidationError):
    pass


class UnitError(ValidationError):
    pass


class InvariantError(ValidationError):
    pass


class SpecError(ValidationError):
    """A synthetic-data specification is invalid for its kind."""


class KindMismatchError(ValidationError):
    pass


class FitError(QcharError):
    """A fit or numerical procedure could not produce a result."""


class ConvergenceError(FitError):
    pass


class NonPhysicalError(FitError):
    pass


class NoDipError(FitError):
    pass


class InsufficientSpanError(FitError):
    pass


class InsufficientNError(FitError):
    pass


class AllPointsDroppedError(FitError):
    pass


class QuadratureError(FitError):
    pass


class StepSizeError(FitError):
    pass


class NonConvergenceError(FitError):
    pass


class MissingMetalPeakError(FitError):
    pass


class EmptySeriesError(FitError):
    pass


class QcharWarning(UserWarning):
    pass


class IdentifiabilityWarning(QcharWarning):
    pass


class ShortSpanWarning(QcharWarning):
    pass


class BandWarning(QcharWarning):
    pass


class DivisionWarning(QcharWarning):
    pass


class PopulationRangeWarning(QcharWarning):
    pass
