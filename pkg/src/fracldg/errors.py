"""Error types shared across the package."""

from __future__ import annotations


class FracLdgError(Exception):
    """Base class for package errors."""


class ConfigError(FracLdgError):
    """Invalid run configuration. Carries the offending field name."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class InstabilityError(FracLdgError):
    """Non-finite state detected during time integration."""

    def __init__(self, time: float) -> None:
        self.time = time
        super().__init__(f"non-finite solution state at t={time:.6g}")


class SingularEvaluationError(FracLdgError, ArithmeticError):
    """Fractional-derivative evaluation at a genuinely singular point."""


class UnsupportedMeshError(FracLdgError, ValueError):
    """Mesh does not satisfy an operation's requirements."""
