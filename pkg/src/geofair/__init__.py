"""Fair representations under a point-wise chi-squared parity constraint."""
from .designer import DesignSolution, LowerBound, low_rate_bound, lower_bound, solve
from .dist import Channel, JointDist, Pmf
from .geometry import (
    GeometryOperators,
    PerturbationDesign,
    ProblemInstance,
    approx_mi_ty,
    approx_mi_xy,
    build_operators,
)
from .oracle import Measure, OracleConfig, grid_search, quadratic_oracle

__all__ = [
    "Channel", "DesignSolution", "GeometryOperators", "JointDist", "LowerBound", "Measure",
    "OracleConfig", "PerturbationDesign", "Pmf", "ProblemInstance", "approx_mi_ty",
    "approx_mi_xy", "build_operators", "grid_search", "low_rate_bound", "lower_bound",
    "quadratic_oracle", "solve",
]
