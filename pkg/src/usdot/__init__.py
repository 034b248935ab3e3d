"""One-dimensional semi-discrete partial optimal transport with quadratic cost.

The package solves min over partial transport plans between a compactly
supported density and a weighted Dirac cloud on the line, through the dual
problem.  The dual is smoothed by thickening the density into a 2D strip of
half-width eps, which makes the Kantorovich functional twice differentiable
with a tridiagonal positive semi-definite Hessian; a damped Newton iteration
with an eps-continuation schedule then converges fast and the eps -> 0 limit
recovers the unregularized potentials at a quadratic rate.
"""

from .density import Density1D, KernelSpec, build_density, from_histogram, from_nodes, hat, truncated_gaussian, uniform
from .cells import CellLayout, SortedDiracs, barycenters, directional_derivative, dual_value, laguerre_boundaries, layout, masses
from .regularization import RegParams, eps_derivative, fstar, reg_dual_value, reg_hessian, reg_masses
from .tridiag import TridiagSym, tridiag_solve
from .solver import SolverConfig, SolverReport, solve_regularized, solve_unregularized, solve_with_continuation
from .spectral import LaplacianExt, connectivity_check, fiedler_bound, laplacian_extension, min_eig_sym
from .ddot import AssignmentResult, dd_partial_transport, discretize
from .sliced import (
    DirectionReport,
    FistResult,
    PointCloud,
    RegisterConfig,
    RegisterResult,
    RigidTransform,
    TargetShape,
    fist_step,
    fit_rigid,
    project,
    read_off,
    read_points,
    register,
)

__all__ = [
    "Density1D", "KernelSpec", "build_density", "from_histogram", "from_nodes",
    "hat", "truncated_gaussian", "uniform",
    "CellLayout", "SortedDiracs", "barycenters", "directional_derivative",
    "dual_value", "laguerre_boundaries", "layout", "masses",
    "RegParams", "eps_derivative", "fstar", "reg_dual_value", "reg_hessian", "reg_masses",
    "TridiagSym", "tridiag_solve",
    "SolverConfig", "SolverReport", "solve_regularized", "solve_unregularized",
    "solve_with_continuation",
    "LaplacianExt", "connectivity_check", "fiedler_bound", "laplacian_extension",
    "min_eig_sym",
    "AssignmentResult", "dd_partial_transport", "discretize",
    "DirectionReport", "FistResult", "PointCloud", "RegisterConfig", "RegisterResult",
    "RigidTransform", "TargetShape", "fist_step", "fit_rigid", "project",
    "read_off", "read_points", "register",
]
