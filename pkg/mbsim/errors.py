"""Error hierarchy and classification for the simulator."""

from enum import Enum
from typing import Optional


class ErrorCategory(str, Enum):
    """Error categories used to pick a process exit code."""
    USAGE = "USAGE"              # Bad input, bad flags, malformed files
    UNSUPPORTED = "UNSUPPORTED"  # Valid input the code deliberately refuses
    NUMERICAL = "NUMERICAL"      # Solver stalls, degenerate densities
    INVARIANT = "INVARIANT"      # A mechanism produced an invalid outcome
    INTERNAL = "INTERNAL"        # Anything else


class MbsimError(Exception):
    """Base class for every error raised by mbsim."""
    category: ErrorCategory = ErrorCategory.INTERNAL


class UsageError(MbsimError, ValueError):
    """Invalid arguments, shapes, encodings or instance files."""
    category = ErrorCategory.USAGE


class UnsupportedOperationError(MbsimError):
    """Operation not defined for this variant (e.g. virtual value of a discrete law)."""
    category = ErrorCategory.UNSUPPORTED


class DomainError(MbsimError, ValueError):
    """Function evaluated outside the support where it is defined."""
    category = ErrorCategory.NUMERICAL


class UnsupportedRegimeError(MbsimError):
    """Hazard regime that SingleDimOptimal has no closed form for."""
    category = ErrorCategory.UNSUPPORTED


class SizeGuardError(MbsimError):
    """Finite instance has too many joint type profiles for the dense LP."""
    category = ErrorCategory.UNSUPPORTED

    def __init__(self, count: int, limit: int):
        super().__init__(f"{count} joint type profiles exceeds the limit of {limit}")
        self.count = count
        self.limit = limit


class SolverStallError(MbsimError):
    """Simplex hit its iteration cap without reaching optimality."""
    category = ErrorCategory.NUMERICAL

    def __init__(self, iterations: int, phase: Optional[int] = None):
        where = f" in phase {phase}" if phase is not None else ""
        super().__init__(f"simplex stalled{where} after {iterations} iterations")
        self.iterations = iterations
        self.phase = phase


class InvariantViolation(MbsimError, AssertionError):
    """An outcome broke feasibility, payment or IR bookkeeping."""
    category = ErrorCategory.INVARIANT


def classify_error(exc: BaseException) -> ErrorCategory:
    """Classify an exception into an ErrorCategory.

    Args:
        exc: The exception to classify

    Returns:
        The category; foreign ValueError/TypeError/FileNotFoundError count as usage
    """
    if isinstance(exc, MbsimError):
        return exc.category
    if isinstance(exc, (FileNotFoundError, ValueError, TypeError)):
        return ErrorCategory.USAGE
    return ErrorCategory.INTERNAL


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to a CLI exit code (2 for usage-type errors, else 1)."""
    category = classify_error(exc)
    if category in (ErrorCategory.USAGE, ErrorCategory.UNSUPPORTED):
        return 2
    return 1


__all__ = [
    "ErrorCategory",
    "MbsimError",
    "UsageError",
    "UnsupportedOperationError",
    "DomainError",
    "UnsupportedRegimeError",
    "SizeGuardError",
    "SolverStallError",
    "InvariantViolation",
    "classify_error",
    "exit_code_for",
]
