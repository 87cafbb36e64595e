"""Velocity-vorticity-Bernoulli pressure solvers for the 2D Oseen equations.

Two discretisations share one driver: a mixed scheme (RT_k velocity,
continuous P_{k+1} vorticity, discontinuous P_k pressure) and a DG scheme
(P_{k+1}^2 / P_k / P_k with jump-penalising numerical fluxes).
"""
from .diagnostics import ErrorReport, enstrophy_palinstrophy, error_norms, fit_rates
from .dg import assemble_dg_system, dg_spaces
from .driver import (InitialCondition, NumericalFailure, Scenario, SolutionTriple, TimeLoopConfig,
                     get_scenario, run_transient, solve_params, solve_steady)
from .fespace import FEFunction, FESpace, SpaceKind, build_space, eval_basis
from .linalg import LUFactorization, SingularMatrix
from .manufactured import ManufacturedSolution
from .mesh import BoundaryTag, Mesh, generate_structured, read_mesh, tag_boundary, write_mesh
from .mixed import OseenParams, SaddleSystem, assemble_mixed_system, mixed_spaces

__version__ = "0.1.0"

__all__ = [
    "BoundaryTag", "ErrorReport", "FEFunction", "FESpace", "InitialCondition", "LUFactorization",
    "ManufacturedSolution", "Mesh", "NumericalFailure", "OseenParams", "SaddleSystem", "Scenario",
    "SingularMatrix", "SolutionTriple", "SpaceKind", "TimeLoopConfig", "assemble_dg_system",
    "assemble_mixed_system", "build_space", "eval_basis", "dg_spaces", "enstrophy_palinstrophy", "error_norms",
    "fit_rates", "generate_structured", "get_scenario", "mixed_spaces", "read_mesh", "run_transient",
    "solve_params", "solve_steady", "tag_boundary", "write_mesh",
]
