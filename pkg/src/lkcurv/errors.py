"""Exception hierarchy shared by all lkcurv modules."""

from __future__ import annotations


class LKCurvError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(LKCurvError, ValueError):
    pass


class DomainError(LKCurvError, ValueError):
    pass


class ShapeError(LKCurvError, ValueError):
    pass


class ExtrapolationError(LKCurvError):
    def __init__(self, message: str, series=None):
        super().__init__(message)
        self.series = list(series) if series is not None else []


class ChartDegeneracyError(LKCurvError):
    pass


class PreconditionError(LKCurvError, ValueError):
    pass


class DataError(LKCurvError):
    """Required data (link table entry, alpha, chi) is missing or inconsistent."""


class SolverError(LKCurvError):
    pass


class StratumLookupError(LKCurvError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


class SchemaError(LKCurvError):
    pass


class ParseError(LKCurvError):
    pass


class ValidationFailure(LKCurvError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class DivergenceError(LKCurvError):
    pass


class UnsupportedSliceError(LKCurvError):
    pass


class StabilizationError(LKCurvError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class IncompleteSearchError(LKCurvError):
    pass


class RangeError(LKCurvError, ValueError):
    pass


class StratumTypeError(LKCurvError, TypeError):
    """An operation was asked of a stratum of the wrong kind (e.g. real vs complex)."""
