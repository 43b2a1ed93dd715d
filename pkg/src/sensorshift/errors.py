"""Exception types shared across the library."""


class SensorShiftError(Exception):
    """Base class for all library errors."""


class InputError(SensorShiftError, ValueError):
    """Malformed or mismatched inputs: names, shapes, ranges, labels."""


class ZeroProbabilityError(SensorShiftError):
    """Conditioning on a cell that carries no probability mass."""

    def __init__(self, cell, message=None):
        self.cell = cell
        super().__init__(message or f"zero-probability conditioning cell {cell!r}")


class SupportViolationError(SensorShiftError):
    """p > 0 where q = 0 inside a divergence; carries the offending cell."""

    def __init__(self, cell, message=None):
        self.cell = cell
        super().__init__(message or f"support violation at cell {cell!r}: p > 0 but q = 0")


class InconsistentSystemError(SensorShiftError):
    """A linearly dependent row whose right-hand side contradicts the retained rows."""


class InfeasibleSystemError(SensorShiftError):
    """No non-negative solution, or no feasible point under the given constraints."""


class CombinatorialLimitError(SensorShiftError):
    """Sub-matrix enumeration would exceed the configured combination limit."""


class DimensionLimitError(SensorShiftError):
    """Input dimension exceeds the configured limit for an exact method."""


class UndefinedConditionalError(SensorShiftError):
    """Conditional probability whose denominator is zero over the whole identified set."""


class NumericalError(SensorShiftError):
    """Numerically singular or severely ill-conditioned intermediate quantity."""
