"""Exception hierarchy.

Numerical failures derive from :class:`NumericalError` so the CLI can map
them to exit code 1; everything else that is a bad input is a
:class:`ValueError` subclass.
"""


class NetdensError(Exception):
    """Base class for package errors."""


class NetworkError(NetdensError, ValueError):
    """Malformed network or network point."""

    def __init__(self, message, offending_id=None):
        super().__init__(message)
        self.offending_id = offending_id


class NumericalError(NetdensError, ArithmeticError):
    """A numerical procedure could not produce a result."""


class DegenerateMomentsError(NumericalError):
    """A truncated kernel window yields a singular moment matrix."""


class SingularDesignError(NumericalError):
    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class InsufficientSupportError(NumericalError):
    def __init__(self, message, n_effective=0):
        super().__init__(message)
        self.n_effective = n_effective


class NothingToTestError(NetdensError, ValueError):
    """A vertex test was requested with fewer than two edge estimates."""


class RecursionLimitError(NumericalError):
    """Equal-split path enumeration exceeded its depth cap."""
