# anelastic/errors.py
"""
Failure kinds raised by the numerical core.

Everything subclasses ValueError (bad input) or RuntimeError (a solver gave
up), so callers that only catch the builtins keep working.
"""
from __future__ import annotations

from typing import Optional


class GridError(ValueError):
    """Invalid grid, mismatched grids, or wrong component count."""


class PositivityError(ValueError):
    """A density that must stay strictly positive does not."""


class WindingError(ValueError):
    """Phase winding that does not close up across a period."""


class EigenError(ValueError):
    """Bad operator input or an eigensystem that fails its residual contract."""


class ToleranceConflict(ValueError):
    pass


class ConstraintViolation(ValueError):
    """A field fails a structural constraint (gradient type, weighted divergence)."""

    def __init__(self, message: str, norm: float):
        super().__init__(f"{message} (norm={norm:.3e})")
        self.norm = float(norm)


class TimeMismatch(ValueError):
    pass


class SnapshotError(ValueError):
    """Trajectory too short or snapshot times misaligned."""


class ScenarioConfigError(ValueError):
    pass


class StepBudgetExceeded(RuntimeError):
    pass


class CFLViolation(RuntimeError):
    pass


class ConvergenceFailure(RuntimeError):
    """Iterative elliptic solve hit its iteration cap."""

    def __init__(
        self,
        iterations: int,
        residual: float,
        condition_estimate: Optional[float] = None,
    ):
        msg = f"CG did not converge after {iterations} iterations (residual={residual:.3e}"
        if condition_estimate is not None:
            msg += f", condition estimate ~{condition_estimate:.3g}"
        super().__init__(msg + ")")
        self.iterations = iterations
        self.residual = residual
        self.condition_estimate = condition_estimate


class NearResonanceWarning(UserWarning):
    """Frequency combination closer to zero than gap_tol but not counted as resonant."""
