"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all ridekit errors."""


class DimensionMismatch(ToolkitError, ValueError):
    """Operands disagree in length, step, or grid alignment."""


class InvalidInput(ToolkitError, ValueError):
    """Input violates an operation's precondition (empty, degenerate, unsupported)."""


class GridParseError(ToolkitError, ValueError):
    """Road grid file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainBoundsError(ToolkitError, ValueError):
    """Query point lies outside the supported domain (e.g. grid hull)."""


class FilterDesignError(ToolkitError, ValueError):
    """Digital filter cannot be designed at the requested sample rate."""


class NumericFailure(ToolkitError, RuntimeError):
    """Integration diverged or produced non-finite values."""


class ConfigError(ToolkitError, ValueError):
    """Configuration is missing fields or holds inconsistent values."""


class OptimizationFailure(ToolkitError, RuntimeError):
    """Optimizer could not continue (persistent model evaluation failures)."""
