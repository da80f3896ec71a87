"""Exception hierarchy shared across the package."""


class PrioqError(Exception):
    """Base class for all package errors."""


class ContractError(PrioqError, ValueError):
    """An argument is outside the documented domain of an operation."""


class DegenerateInputError(PrioqError, ValueError):
    """Input is well-formed but degenerate for the requested quantity."""


class ModelError(PrioqError, ValueError):
    """The queueing model violates a structural assumption.

    ``findings`` carries the individual violations when available.
    """

    def __init__(self, message, findings=()):
        super().__init__(message)
        self.findings = list(findings)


class InstabilityError(PrioqError):
    """Traffic intensity of the (sub)system is not below one."""

    def __init__(self, message, rho=None):
        super().__init__(message)
        self.rho = rho


class ShapeMismatchError(PrioqError, ValueError):
    """A system does not have the shape a special-case evaluator requires."""


class UnsupportedMetricError(PrioqError, ValueError):
    """The requested simulation metric is undefined for the discipline."""
