"""Exception types shared across the package.

ValueError subclasses signal violated preconditions or bad input (CLI exit
code 2); RuntimeError subclasses signal failures of a computation that was
legitimately requested (CLI exit code 1).
"""

from __future__ import annotations


class FrameParseError(ValueError):
    """Syntax or identifier error in a frame description, with position."""

    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class SingularSetError(ValueError):
    """Operation requested at a point where the frame determinant vanishes."""


class OffSingularSetError(ValueError):
    """Operation restricted to the singular set was requested away from it."""


class ClassificationError(ValueError):
    """Point does not have the class required by the operation."""


class DomainBoxError(RuntimeError):
    """Trajectory left the declared domain box of the frame."""


class ShootingFailureError(RuntimeError):
    """No shooting seed converged; carries the best residual seen."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class ScanFailureError(RuntimeError):
    """A sign-change scan found no root inside a guaranteed bracket."""


class QuadratureToleranceError(RuntimeError):
    """Adaptive quadrature hit the subdivision limit before the tolerance."""

    def __init__(self, message: str, value: float, error_estimate: float):
        super().__init__(
            f"{message} (value {value:.6e}, error estimate {error_estimate:.3e})"
        )
        self.value = value
        self.error_estimate = error_estimate


class FieldVanishesError(RuntimeError):
    """The abnormal direction field dropped below the pole threshold."""
