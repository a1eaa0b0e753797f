"""Robinsonian l∞ seriation engine."""
from seriation.core import (
    Dissimilarity, FitResult, Infeasible, TotalOrder, candidate_errors,
    check_robinson, compatibility_violation, fit_for_order, linf_distance,
    subinterval_max,
)
from seriation.solver import fit

__all__ = [
    "Dissimilarity", "FitResult", "Infeasible", "TotalOrder", "candidate_errors",
    "check_robinson", "compatibility_violation", "fit", "fit_for_order",
    "linf_distance", "subinterval_max",
]
