"""Exception hierarchy shared by every module of the package."""


class ReconError(Exception):
    """Base class for all package errors."""


class FormatError(ReconError, ValueError):
    """Malformed input file (bad header, bad JSON document, ...)."""


class ShapeError(ReconError, ValueError):
    """Vector or matrix length does not match the grid."""


class DataError(ReconError, ValueError):
    """Non-finite or otherwise unusable data values."""


class StateError(ReconError, RuntimeError):
    """Operation not allowed in the object's current state (e.g. centering twice)."""


class ParameterError(ReconError, ValueError):
    """Invalid argument value."""


class OperatorError(ReconError, ValueError):
    """Invalid measurement operator (dry cell, duplicate index, ...)."""


class UnderdeterminedError(ReconError, ValueError):
    """Least-squares fit has fewer observations than unknowns."""


class ConfigError(ReconError, ValueError):
    """Invalid experiment configuration."""


class NumericalError(ReconError, ArithmeticError):
    """A reconstruction produced non-finite output or a linear solve failed."""
