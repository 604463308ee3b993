"""Exception hierarchy shared by every tammkit module."""


class TammkitError(Exception):
    """Base class for all tammkit errors."""


class DomainError(TammkitError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(DomainError):
    """A tabulated quantity was queried outside its sampled range."""


class ParseError(TammkitError, ValueError):
    """A file or document could not be decoded into a model object."""


class InvalidMaterialError(TammkitError, ValueError):
    pass


class StructuralError(TammkitError, ValueError):
    """A stack or scene violates a structural invariant."""


class SamplingError(DomainError):
    pass


class InsufficientDataError(TammkitError, ValueError):
    pass


class ConvergenceError(TammkitError, RuntimeError):
    """An iterative solver hit its iteration cap.

    ``best`` carries the best parameter vector seen so far and ``diagnostics``
    a dict with whatever the solver could report (cost, iterations, ...).
    """

    def __init__(self, message, best=None, diagnostics=None):
        super().__init__(message)
        self.best = best
        self.diagnostics = diagnostics or {}


class CalibrationError(TammkitError, RuntimeError):
    pass


class EmptyDispersionError(TammkitError, RuntimeError):
    pass


class NoSignalError(TammkitError, ValueError):
    pass


class BoundsError(TammkitError, ValueError):
    """Scene geometry does not fit inside the simulation grid."""


class InstabilityError(TammkitError, RuntimeError):
    """Non-finite field values appeared during time stepping."""

    def __init__(self, message, cell=None, step=None):
        super().__init__(message)
        self.cell = cell
        self.step = step
