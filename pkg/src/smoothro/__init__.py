"""Robust linear optimization over smooth uncertainty sets."""

from .adversarial import WorstCase, worst_case, worst_case_flow, worst_case_lp
from .calibration import (CalibrationRule, MaxBased, RangeBased, StdevBased, enclosing_gamma, gamma_from_covariance,
                          gamma_from_scenarios, violation_bound)
from .errors import (DimensionError, DomainError, EmptySetError, PatternMismatchError, SmoothROError, SolverError,
                     UnsupportedFeatureError)
from .lp import LinearProgram, LPOptions, LPSolution, solve_lp
from .model import RobustLP, sign_pattern, validate
from .reformulate import auto_reformulate, dualize
from .sets import EllipsoidSet, SmoothSet, UncertaintyGraph, build, complete_edges, smooth_set
from .solver import SolveResult, SolverOptions, robust_violation, solve

__version__ = "0.1.0"

__all__ = [
    "CalibrationRule", "DimensionError", "DomainError", "EllipsoidSet", "EmptySetError", "LPOptions", "LPSolution",
    "LinearProgram", "MaxBased", "PatternMismatchError", "RangeBased", "RobustLP", "SmoothROError", "SmoothSet",
    "SolveResult", "SolverError", "SolverOptions", "StdevBased", "UncertaintyGraph", "UnsupportedFeatureError",
    "WorstCase", "auto_reformulate", "build", "complete_edges", "dualize", "enclosing_gamma",
    "gamma_from_covariance", "gamma_from_scenarios", "robust_violation", "sign_pattern", "smooth_set", "solve",
    "solve_lp", "validate", "violation_bound", "worst_case", "worst_case_flow", "worst_case_lp",
]
