"""Exception classes raised by bathdisc.

Everything numerical derives from :class:`NumericalError` so that drivers can
map it to a single exit status; invalid user input raises
:class:`ConfigError` (a ``ValueError``).
"""


class BathDiscError(Exception):
    """Base class for all package errors."""


class ConfigError(BathDiscError, ValueError):
    """Invalid parameters or configuration.

    Parameters
    ----------
    message : str
        Human readable description.
    path : str, optional
        Dotted key path of the offending entry, e.g. ``"density.alpha"``.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class NumericalError(BathDiscError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


class QuadratureError(NumericalError):
    def __init__(self, message, achieved=None):
        self.achieved = achieved
        if achieved is not None:
            message = f"{message} (achieved relative accuracy {achieved:.3e})"
        super().__init__(message)


class OnSupportError(NumericalError):
    """Evaluation on the real axis inside the support of a density."""


class PoleError(NumericalError):
    pass


class EmptyBathError(NumericalError):
    """A discretization produced no mode with positive weight."""


class InstabilityError(NumericalError):
    def __init__(self, message, order=None):
        self.order = order
        super().__init__(message)


class ConvergenceError(NumericalError):
    pass


class CertificationError(NumericalError):
    def __init__(self, message, deviation=None):
        self.deviation = deviation
        super().__init__(message)


class StepSizeError(NumericalError):
    def __init__(self, message, defect=None):
        self.defect = defect
        super().__init__(message)


class SectorError(NumericalError):
    """Many-body sector too large or state vanishes in the sector."""


class GridMismatchError(BathDiscError, ValueError):
    pass
