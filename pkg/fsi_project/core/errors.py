"""
Exception hierarchy shared by all simulator modules.
"""

from typing import List, Optional, Sequence


class FsiError(Exception):
    """Base class for simulator errors."""


class ConfigurationError(FsiError, ValueError):
    """Invalid grid, parameters or mismatched operands."""


class ConfigError(ConfigurationError):
    """
    Run configuration rejected. Carries every problem found, not only the first.
    """

    def __init__(self, errors: Sequence[str]):
        self.errors: List[str] = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid configuration")


class InputError(FsiError, ValueError):
    """Non-finite values in step inputs."""

    def __init__(self, field: str, message: Optional[str] = None):
        self.field = field
        super().__init__(message or f"non-finite values in input field '{field}'")


class StepFailure(FsiError):
    """
    A time step could not be completed.

    Attributes:
        residual: last relative residual of the failing solve (if any)
        suggested_dt: step size the caller may retry with
        residual_history: residual per outer iteration, when tracked
    """

    def __init__(self, message: str, residual: Optional[float] = None,
                 suggested_dt: Optional[float] = None,
                 residual_history: Optional[Sequence[float]] = None):
        self.residual = residual
        self.suggested_dt = suggested_dt
        self.residual_history = list(residual_history) if residual_history is not None else []
        super().__init__(message)


class ConvergenceError(StepFailure):
    """Iterative solver hit its iteration limit."""


class CflViolation(StepFailure):
    """Step size exceeds the advective stability limit."""


class NumericalInstability(FsiError):
    """NaN or inf detected in a field or diagnostic after a step."""

    def __init__(self, field: str, step: Optional[int] = None):
        self.field = field
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite values in '{field}'{where}")
