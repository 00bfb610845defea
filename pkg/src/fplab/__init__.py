"""Fixed-point iteration toolkit: operators, Halpern-type solvers, checkers."""
from . import kernels
from .core import CountedOperator, DimensionError, NonFiniteError, NormKind, as_vector
from .solvers import (
    ContractionFailure, HaltMode, IterationTrace, RunResult, SolverConfig, Termination,
    adaghal, fixhal, fixhal_restarted, ghal, halpern_classic, picard, resolvent, run_solver,
)

__version__ = "0.1.0"

__all__ = [
    "ContractionFailure", "CountedOperator", "DimensionError", "HaltMode", "IterationTrace",
    "NonFiniteError", "NormKind", "RunResult", "SolverConfig", "Termination", "adaghal",
    "as_vector", "fixhal", "fixhal_restarted", "ghal", "halpern_classic", "kernels", "picard",
    "resolvent", "run_solver",
]
