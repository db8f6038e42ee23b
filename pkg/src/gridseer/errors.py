"""Exception types shared across the gridseer package."""


class GridseerError(Exception):
    """Base class for all gridseer errors."""


class ParseError(GridseerError):
    """A file could not be parsed (malformed JSON, wrong field types)."""


class ValidationError(GridseerError):
    """A domain object violates one of its invariants."""


class IoError(GridseerError):
    """Reading or writing a file failed at the OS level."""


class SingularNetwork(GridseerError):
    """The network matrix is singular (isolated bus or degenerate topology)."""


class NonConvergence(GridseerError):
    """Newton-Raphson exhausted its iterations.

    Carries the last mismatch so callers can report how far off the solve was.
    """

    def __init__(self, message, mismatch=None):
        super().__init__(message)
        self.mismatch = mismatch


class SingularJacobian(GridseerError):
    """A pivot in the Jacobian factorization fell below the singularity threshold."""


class ShapeMismatch(GridseerError):
    """Array dimensions disagree with the parameter shapes."""


class DegenerateLabels(GridseerError):
    """A classifier was given a single-class label set."""


class DegenerateData(GridseerError):
    """A regression target carries no information (all values identical)."""


class ScalerNotFitted(GridseerError):
    """The penalty scaler was used before fit() established its bounds."""


class TooManyGenerators(GridseerError):
    """Exhaustive subset enumeration was requested past its size bound."""
