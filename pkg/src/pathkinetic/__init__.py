"""Fixed-point solvers for path-dependent kinetic equations on discrete measures."""

from .errors import (
    CapabilityError,
    DegenerateConstants,
    EvaluationError,
    KineticError,
    LocalityViolated,
    NumericError,
    StructuralError,
    UnsupportedKindError,
    ValidationError,
    VisibilityError,
)
from .fixpoint import (
    SolveReport,
    solve_adapted,
    solve_anticipating,
    solve_global_pathindep,
    solve_local,
    solve_mfg,
)
from .generators import Family, GeneratorSpec, Mode, apply, make_example
from .measures import DiscreteMeasure, MeasurePath, flat_distance, path_distance
from .propagators import BackendConfig, BackendKind, propagate, propagate_path

__version__ = "0.1.0"

__all__ = [
    "KineticError",
    "ValidationError",
    "StructuralError",
    "EvaluationError",
    "NumericError",
    "UnsupportedKindError",
    "CapabilityError",
    "VisibilityError",
    "LocalityViolated",
    "DegenerateConstants",
    "SolveReport",
    "solve_local",
    "solve_global_pathindep",
    "solve_adapted",
    "solve_anticipating",
    "solve_mfg",
    "Family",
    "GeneratorSpec",
    "Mode",
    "apply",
    "make_example",
    "DiscreteMeasure",
    "MeasurePath",
    "flat_distance",
    "path_distance",
    "BackendConfig",
    "BackendKind",
    "propagate",
    "propagate_path",
]
