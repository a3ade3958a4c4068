"""Shortest closed polygonal chain through a cyclic sequence of convex sets."""
from waist.diagnostics import certify, diagnose
from waist.geometry import (AxisBox, Ball, GeometryError, Halfspace, Line, Polygon2D,
                            Problem, Segment)
from waist.objective import optimality_residual, perimeter, subgradient
from waist.oracle import brute_force_min
from waist.solver import (Constant, Diminishing, ExactLineSearch, SolveResult, SolverConfig,
                          Termination, nag_solve, psd_solve, psd_solve_aitken, solve)

__all__ = [
    "AxisBox", "Ball", "Constant", "Diminishing", "ExactLineSearch", "GeometryError",
    "Halfspace", "Line", "Polygon2D", "Problem", "Segment", "SolveResult", "SolverConfig",
    "Termination", "brute_force_min", "certify", "diagnose", "nag_solve",
    "optimality_residual", "perimeter", "psd_solve", "psd_solve_aitken", "solve",
    "subgradient",
]
