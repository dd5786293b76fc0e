"""Exception types raised across the package."""


class SnapBMError(Exception):
    """Base class for all package errors."""


class ConfigError(SnapBMError, ValueError):
    """A domain or run configuration could not be parsed or is invalid."""


class InvalidGeometry(SnapBMError, ValueError):
    """Curves violate the domain assumptions (self-intersection, overlap, ...)."""


class DegenerateGeometry(SnapBMError):
    """A geometric parameter is too small to be resolved numerically."""


class PointNotOnCurve(SnapBMError, ValueError):
    pass


class PointOutsideDomain(SnapBMError, ValueError):
    pass


class NoBarriers(SnapBMError):
    """The operation needs at least one semipermeable barrier."""


class InconsistentSigns(SnapBMError, ValueError):
    """Initial signs contradict the side of the starting point."""


class StuckParticle(SnapBMError):
    """A single Euler step needed more reflections than allowed.

    Usually means ``dt`` is too large for the curvature or spacing of the
    curves.
    """

    def __init__(self, message, particle=None):
        super().__init__(message)
        self.particle = particle


class EmptyEnsemble(SnapBMError, ValueError):
    pass


class GridMismatch(SnapBMError, ValueError):
    pass


class InvalidMinorization(SnapBMError, ValueError):
    """Doeblin constant times area must lie strictly between 0 and 1."""


class ConstraintViolation(SnapBMError, ValueError):
    pass


class NotConverged(UserWarning):
    """A convergence diagnostic failed; the result is returned but flagged."""


class HorizonTooShort(UserWarning):
    """The mixing threshold was not reached within the simulated horizon."""


class SmallSample(UserWarning):
    """A minimum over cells is driven by cells with very few expected samples."""
