"""Finite-difference geodesics in the space of volume forms on the flat torus."""
from .errors import (ConfigurationError, ContinuationFailure, DomainError, NonConvergence,
                     SolverError, StepFailure)
from .grid import BoundaryPair, TorusGrid, integrate_spatial, make_grid, normalize, trig_field
from .operators import dp_apply, laplacian, p_op, q_op
from .solver import (SolveReport, SolverConfig, continuation_in_eps, continuation_in_s,
                     newton_solve, solve_geodesic)
from .geometry import distance, energy, sectional_curvature

__all__ = [
    "BoundaryPair", "ConfigurationError", "ContinuationFailure", "DomainError",
    "NonConvergence", "SolveReport", "SolverConfig", "SolverError", "StepFailure",
    "TorusGrid", "continuation_in_eps", "continuation_in_s", "distance", "dp_apply",
    "energy", "integrate_spatial", "laplacian", "make_grid", "newton_solve", "normalize",
    "p_op", "q_op", "sectional_curvature", "solve_geodesic", "trig_field",
]
__version__ = "0.1.0"
