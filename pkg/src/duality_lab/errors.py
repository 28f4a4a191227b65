"""Exception types raised across the package."""


class DualityLabError(Exception):
    """Base class for all package errors."""


class PaddingViolation(DualityLabError, ValueError):
    pass


class GridMismatch(DualityLabError, ValueError):
    pass


class DegenerateSplit(DualityLabError, ValueError):
    pass


class SingularHouseholder(DualityLabError, ValueError):
    pass


class NullOutcome(DualityLabError, ValueError):
    """The detector outcome has (numerically) zero probability."""


class OverlapSingularity(DualityLabError, ValueError):
    pass


class DegenerateFringe(DualityLabError, ValueError):
    pass


class IndistinguishableStates(DualityLabError, ValueError):
    pass


class UndefinedPhase(DualityLabError, ValueError):
    pass


class OverlapTooLarge(DualityLabError, ValueError):
    pass


class DetectorTooSharp(DualityLabError, ValueError):
    pass


class WindowTooNarrow(DualityLabError, ValueError):
    pass


class EmissionIncomplete(DualityLabError, ValueError):
    """Detection happens before spontaneous emission has finished (gamma*t too small)."""


class ConfigError(DualityLabError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
