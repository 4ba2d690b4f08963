"""Exception hierarchy for the package."""


class MSError(Exception):
    """Base class for all errors raised by mstvtp."""


class DimensionError(MSError, ValueError):
    """Array lengths or shapes disagree with the model specification."""


class InputError(MSError, ValueError):
    """Non-finite or otherwise invalid input data."""


class DomainError(MSError, ValueError):
    """A value lies on or outside the boundary of its admissible domain."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ParameterError(MSError, ValueError):
    """Parameters violate a model invariant (e.g. sigma2 <= 0, B outside (0, 1))."""


class DegeneracyError(MSError, FloatingPointError):
    """The filter produced a zero or non-finite predictive density."""

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class IngestionError(MSError, ValueError):
    """A yields file could not be read into clean level series."""
