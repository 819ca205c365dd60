"""Exception hierarchy shared across the package."""


class GfamError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSpecError(GfamError, ValueError):
    """A basis or term specification is internally inconsistent."""


class DomainError(GfamError, ValueError):
    """Evaluation points or parameters fall outside the admissible domain."""


class SpecificationError(GfamError, ValueError):
    """A model term does not match the dataset it is built against."""


class ShapeError(GfamError, ValueError):
    """Matrix or grid dimensions are incompatible."""


class DataError(GfamError, ValueError):
    """Response values violate the support of the chosen distribution."""


class NumericError(GfamError, ArithmeticError):
    """A numeric operation produced non-finite or singular results."""


class ConvergenceError(GfamError, RuntimeError):
    """An iterative solver failed to converge; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class GeneratorError(GfamError, ValueError):
    """A synthetic-data generator was given degenerate parameters."""


class MetricError(GfamError, ValueError):
    """An evaluation metric is undefined for the given inputs."""
