"""Exception types shared across the package.

The CLI maps :class:`DomainError` to exit status 2 and
:class:`CapabilityRefusal` to exit status 3.
"""


class SupportError(Exception):
    """Base class for all package errors."""


class DomainError(SupportError, ValueError):
    """An argument lies outside the domain of an operation."""


class UnsupportedBound(DomainError):
    """A bound was requested for a class/metric/direction with no proven result.

    ``reference`` names the closest available result so callers can report it.
    """

    def __init__(self, message, reference=None):
        super().__init__(message)
        self.reference = reference


class CapabilityRefusal(SupportError):
    """An exact computation would exceed a configured cardinality cap."""

    def __init__(self, message, cardinality=None):
        super().__init__(message)
        self.cardinality = cardinality


class TrackerConflict(SupportError, RuntimeError):
    """A coordinate was relabeled with a conflicting value (a driver bug)."""
