"""Exception types shared across the package."""


class ThreshConvexError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class ValidationError(ThreshConvexError, ValueError):
    """Bad input: shapes, ranges, malformed files."""

    exit_code = 1


class DimensionError(ValidationError):
    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class BudgetExceededError(ValidationError):
    """A combinatorial enumeration would exceed its configured budget."""


class InfeasibleError(ThreshConvexError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RealizationError(ThreshConvexError):
    """A binary pattern could not be realized by a hidden neuron."""

    def __init__(self, message, mismatched=None, atoms=None):
        super().__init__(message)
        self.mismatched = list(mismatched) if mismatched is not None else []
        self.atoms = list(atoms) if atoms is not None else []


class UnsupportedLossError(ValidationError):
    pass
