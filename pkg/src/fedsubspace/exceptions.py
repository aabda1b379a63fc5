"""Exception classes for the FedAvg representation-learning simulator."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .models import RoundMetrics


class FedSubspaceError(Exception):
    """Base exception for all simulator errors."""


class RankDeficientError(FedSubspaceError, ValueError):
    """Raised when a factorization meets a numerically dependent column."""


class NoConvergenceError(FedSubspaceError, ArithmeticError):
    """Raised when an iterative method hits its iteration cap."""

    def __init__(self, iterations: int, message: str = ""):
        self.iterations = iterations
        detail = f" ({message})" if message else ""
        super().__init__(f"no convergence after {iterations} iterations{detail}")


class DimensionError(FedSubspaceError, ValueError):
    """Raised when matrix or instance dimensions are inconsistent."""


class TargetInfeasibleError(FedSubspaceError, ValueError):
    """Raised when a requested initial distance cannot be planted."""


class InvalidSampleSizeError(FedSubspaceError, ValueError):
    """Raised when more clients are requested than exist."""


class DivergedError(FedSubspaceError, ArithmeticError):
    """Raised when training iterates blow up.

    The metrics recorded before the blow-up are kept on the exception so
    callers can still write partial artifacts.
    """

    def __init__(self, round_t: int, partial_metrics: list[RoundMetrics] | None = None):
        self.round_t = round_t
        self.partial_metrics = list(partial_metrics or [])
        super().__init__(f"iterates diverged at round {round_t}")


class DegenerateHeadError(FedSubspaceError, ValueError):
    """Raised when a sampled ground-truth head has zero norm."""


class DegenerateMeanHeadError(FedSubspaceError, ValueError):
    """Raised when the mean ground-truth head vanishes."""


class RankError(FedSubspaceError, ValueError):
    """Raised when a construction needs k > 1."""


class ContainmentViolatedError(FedSubspaceError, ValueError):
    """Raised when B_* w_bar does not lie in col(B0)."""


class InvalidConfigError(FedSubspaceError, ValueError):
    """Raised when a configuration object violates its invariants."""


class ConfigParseError(FedSubspaceError, ValueError):
    """Raised for malformed configuration text."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")
