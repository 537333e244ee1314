"""Exception hierarchy shared across the package."""


class HaircutError(Exception):
    """Base class for all package errors."""


class ModelError(HaircutError, ValueError):
    """A model or parameter set violates one of its invariants."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DomainError(HaircutError, ValueError):
    """An argument lies outside the region where a formula is defined."""


class InversionError(HaircutError, ArithmeticError):
    """Numerical Laplace inversion could not meet its error target."""


class UnattainableTargetError(HaircutError):
    """No haircut in [0, 1) satisfies the requested criterion."""


class EstimationError(HaircutError):
    """Estimation input is degenerate or the likelihood cannot be evaluated."""


class InputError(HaircutError, ValueError):
    """Malformed user input (CSV rows, JSON documents, config values)."""
