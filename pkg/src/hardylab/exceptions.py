"""Exception types shared across the package.

The CLI maps ``ConfigError`` to exit code 2 and ``NumericalError`` (and its
subclasses) to exit code 3.
"""


class HardyLabError(Exception):
    """Base class for all package errors."""


class ConfigError(HardyLabError):
    """Invalid parameters, measures, or configuration files."""


class NumericalError(HardyLabError):
    """A numerical procedure failed to reach its stated tolerance."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge.

    Carries the worst offending panel so failures are diagnosable.
    """

    def __init__(self, message, worst_panel=None):
        super().__init__(message)
        self.worst_panel = worst_panel


class SolverError(NumericalError):
    """The fixed-point solver produced an invalid state (NaN, lost order)."""


class ScanError(NumericalError):
    """Amplitude scan failed (invalid bracket or non-monotone verdicts)."""
