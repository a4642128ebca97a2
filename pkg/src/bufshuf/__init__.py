"""Anonymous buffer shuffling for parallel mixnets: simulation, metrics and exact rates."""
from .core import (
    AssignmentMode,
    BeliefState,
    BufShufError,
    ConfigError,
    DivisibilityError,
    MetricReport,
    MixConfig,
    RangeError,
    RoundAssignment,
    ShapeMismatch,
    initial_state,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentMode",
    "BeliefState",
    "BufShufError",
    "ConfigError",
    "DivisibilityError",
    "MetricReport",
    "MixConfig",
    "RangeError",
    "RoundAssignment",
    "ShapeMismatch",
    "initial_state",
    "validate_config",
]
