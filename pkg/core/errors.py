from __future__ import annotations

from typing import Any, Dict, Optional


class RnoError(Exception):
    """Base error. `exit_code` is what the CLI returns for it."""

    exit_code: int = 1


# ---------- Validation (exit 1) ----------
class InvalidShape(RnoError, ValueError):
    pass


class InvalidSubsystem(RnoError, ValueError):
    pass


class InvalidChannel(RnoError, ValueError):
    pass


class InvalidState(RnoError, ValueError):
    pass


class InvalidRequest(RnoError, ValueError):
    pass


class InvalidProblem(RnoError, ValueError):
    pass


class InvalidSolution(RnoError, ValueError):
    pass


class HypothesisViolated(RnoError, ValueError):
    pass


class ConditionNotMet(RnoError, ValueError):
    pass


class NotFreeComponent(RnoError, ValueError):
    pass


class Vacuous(RnoError, ValueError):
    """Infinite standard robustness makes the requested construction empty."""


class ValidationError(RnoError, ValueError):
    pass


class ParseError(RnoError, ValueError):
    def __init__(self, pointer: str, message: str):
        self.pointer = pointer or "/"
        super().__init__(f"{self.pointer}: {message}")


class IoError(RnoError, OSError):
    pass


# ---------- Solver (exit 2) ----------
class SolverError(RnoError, RuntimeError):
    exit_code = 2

    def __init__(self, message: str, residuals: Optional[Dict[str, Any]] = None):
        self.residuals = dict(residuals or {})
        if self.residuals:
            message = f"{message} (residuals: {self.residuals})"
        super().__init__(message)


class BoundViolation(RnoError, RuntimeError):
    """A proven inequality failed numerically; always a bug or a solver failure."""

    exit_code = 2


# ---------- Guards (exit 3) ----------
class TooLarge(RnoError, ValueError):
    exit_code = 3
