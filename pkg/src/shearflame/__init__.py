"""Turbulent flame speeds for the curvature G-equation in periodic shear flows.

The package solves the periodic cell problem that defines the effective
front speed H_d(p) of a curvature-regularized front in a shear flow,
certifies its strict decrease in the Markstein number d, computes the
zero-curvature speed and its (possibly non-unique) fluctuations, constructs
the physical fluctuation selected as d -> 0, and property-tests the
inequality machinery the slowdown rests on.
"""

from .cell import (
    CellSolution,
    SolverError,
    SweepResult,
    alpha_from_formula,
    mean_identity_check,
    solve_cell,
    solve_viscous_hj,
    sweep_markstein,
    turbulent_flame_speed,
)
from .flows import (
    FlowProfile,
    FlowSpec,
    MaximaSet,
    Momentum,
    NormalizedProblem,
    build_flow,
    flow_from_config,
    locate_maxima,
    normalize,
    preset_flow,
)
from .inviscid import (
    BranchSolution,
    InviscidResult,
    branch_values,
    enumerate_solutions,
    inviscid_threshold,
    solve_inviscid_H,
    turning_point,
)
from .selection import (
    SelectionError,
    SelectionResult,
    physical_fluctuation,
    richardson_slope,
    select_xbar,
    slope_diagnostic,
    verify_selection,
)

__all__ = [
    "BranchSolution",
    "CellSolution",
    "FlowProfile",
    "FlowSpec",
    "InviscidResult",
    "MaximaSet",
    "Momentum",
    "NormalizedProblem",
    "SelectionError",
    "SelectionResult",
    "SolverError",
    "SweepResult",
    "alpha_from_formula",
    "branch_values",
    "build_flow",
    "enumerate_solutions",
    "flow_from_config",
    "inviscid_threshold",
    "locate_maxima",
    "mean_identity_check",
    "normalize",
    "physical_fluctuation",
    "preset_flow",
    "richardson_slope",
    "select_xbar",
    "slope_diagnostic",
    "solve_cell",
    "solve_inviscid_H",
    "solve_viscous_hj",
    "sweep_markstein",
    "turbulent_flame_speed",
    "turning_point",
    "verify_selection",
]

__version__ = "0.1.0"
