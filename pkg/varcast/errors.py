"""Exceptions raised by varcast."""


class VarcastError(Exception):
    """Base class for all varcast errors."""


class SeriesTooShort(VarcastError, ValueError):
    """The series has too few weeks for the requested operation."""


class MissingHistory(VarcastError, ValueError):
    """A lagged raw value needed for seasonal inversion is unavailable."""


class IndexMismatch(VarcastError, ValueError):
    """Two series that must share a time index or labels do not."""


class NonPositiveTotal(VarcastError, ValueError):
    """A normalizing total is zero or negative."""


class NegativeCount(VarcastError, ValueError):
    """A count series contains a negative value."""


class NoOverlap(VarcastError, ValueError):
    """Two time indexes have no week in common."""


class ParseError(VarcastError, ValueError):
    """A CSV row could not be parsed."""


class GapError(VarcastError, ValueError):
    """A series is missing a week inside its range."""


class DuplicateError(VarcastError, ValueError):
    """A (series, week) pair, label, or state appears more than once."""


class UnknownState(VarcastError, ValueError):
    """A state label is absent from the region map."""


class EmptyRegion(VarcastError, ValueError):
    """A region has no member series to average over."""


class InvalidSpec(VarcastError, ValueError):
    """A synthetic data specification is out of range."""


class NotAligned(VarcastError, ValueError):
    """Response and exogenous series do not share a time index."""


class TooFewRows(VarcastError, ValueError):
    """Too few weeks remain after accounting for lags."""


class BadLag(VarcastError, ValueError):
    """Lag orders are inconsistent with the inputs."""


class ShapeMismatch(VarcastError, ValueError):
    """Matrix shapes do not conform."""


class BadGrid(VarcastError, ValueError):
    """A penalty grid is empty, not strictly descending, or negative."""


class InsufficientHistory(VarcastError, ValueError):
    """Not enough observed weeks to produce a forecast."""


class MissingFutures(VarcastError, ValueError):
    """Exogenous future values were requested but not provided."""


class MissingModel(VarcastError, ValueError):
    """A model file is missing or cannot be decoded."""


class ConfigError(VarcastError, ValueError):
    """A configuration value or file is invalid."""


class NonFinite(VarcastError, ArithmeticError):
    """The solver produced a non-finite objective or coefficient."""
