"""Low-rank source iteration with diffusion synthetic acceleration for the
second-order even-parity radiative transfer equation in 2D2V.

Typical use::

    from lrsidsa import build_grid, build_cl_quadrature, builtin_problem, solve, SolverConfig

    prob = builtin_problem("diffusion")
    grid = build_grid(prob.x_range, prob.y_range, 32, 32)
    report = solve(prob, grid, build_cl_quadrature(20, 10), SolverConfig(format="htt"))
"""

from .angular import AngularQuadrature, build_cl_quadrature
from .diffusion_solver import DiffusionSolver, build_diffusion_solver
from .fullrank import (
    DenseMemoryError,
    DenseSolution,
    compare,
    effective_rank,
    hierarchical_singular_values,
    solve_fullrank,
)
from .geometry import SpatialGrid, build_grid
from .krylov import BreakdownError
from .lowrank import HTTensor, LowRankMatrix, TruncationPolicy
from .problems import ProblemSpec, builtin_names, builtin_problem, get_problem, sample_materials
from .sidsa import SolverConfig, SolveReport, discretize, solve

__version__ = "0.1.0"

__all__ = [
    "AngularQuadrature",
    "BreakdownError",
    "DenseMemoryError",
    "DenseSolution",
    "DiffusionSolver",
    "HTTensor",
    "LowRankMatrix",
    "ProblemSpec",
    "SolveReport",
    "SolverConfig",
    "SpatialGrid",
    "TruncationPolicy",
    "build_cl_quadrature",
    "build_diffusion_solver",
    "build_grid",
    "builtin_names",
    "builtin_problem",
    "compare",
    "discretize",
    "effective_rank",
    "get_problem",
    "hierarchical_singular_values",
    "sample_materials",
    "solve",
    "solve_fullrank",
]
