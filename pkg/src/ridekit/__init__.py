"""Ride-comfort analysis toolkit.

Generates or ingests road surfaces, simulates a lumped vehicle over them,
classifies ride comfort by acceleration bands, frequency-weighted vibration,
and the roughness index, locates critical road sections, and calibrates the
vehicle model against reference traces.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DimensionMismatch,
    DomainBoundsError,
    FilterDesignError,
    GridParseError,
    InvalidInput,
    NumericFailure,
    OptimizationFailure,
    ToolkitError,
)

__all__ = [
    "__version__",
    "ToolkitError",
    "DimensionMismatch",
    "InvalidInput",
    "GridParseError",
    "DomainBoundsError",
    "FilterDesignError",
    "NumericFailure",
    "ConfigError",
    "OptimizationFailure",
]
