"""
Custom exception hierarchy for fracpr.
"""

from typing import Optional

import numpy as np


class FracPRError(Exception):
    """Base exception for all fracpr errors."""

    pass


class ConfigurationError(FracPRError):
    """Configuration-related errors."""

    def __init__(self, message: str, key: Optional[str] = None) -> None:
        self.key = key
        super().__init__(message)


class InvalidConfigError(ConfigurationError):
    """Invalid configuration values."""

    pass


class ConfigFileError(ConfigurationError):
    """Error reading or parsing configuration file."""

    pass


class ComputeError(FracPRError):
    """Numerical computation errors."""

    pass


class SolverError(ComputeError):
    """Errors raised by the fractional integrators."""

    pass


class NonFiniteState(SolverError):
    """NaN or infinity appeared in the solution; the integration diverged."""

    def __init__(self, step: int, time: float) -> None:
        self.step = step
        self.time = time
        super().__init__(f"non-finite state at step {step} (t={time:g})")


class ConvergenceFailure(SolverError):
    """A series or iteration did not converge within its term budget."""

    pass


class NoConvergence(ComputeError):
    """Iterative solve stopped without meeting its tolerance.

    Carries the best iterate seen so callers can still report it.
    """

    def __init__(
        self,
        message: str,
        best: Optional[np.ndarray] = None,
        residual: float = float("inf"),
        iterations: int = 0,
    ) -> None:
        self.best = best
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class AnalysisError(FracPRError):
    """Trajectory post-processing errors."""

    pass


class InsufficientSpikes(AnalysisError):
    """Too few spikes for the requested statistic."""

    def __init__(self, needed: int, found: int) -> None:
        self.needed = needed
        self.found = found
        super().__init__(f"need at least {needed} interspike intervals, found {found}")


class InvalidScanError(AnalysisError):
    """Scan grid is empty, unordered or has duplicates."""

    pass
