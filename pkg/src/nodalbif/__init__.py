"""Nodal solutions and bifurcating branches of the coupled cubic system

    -Lap u + u = u^3 + beta u v^2,   -Lap v + v = v^3 + beta u^2 v

on the unit ball in R^3 with Dirichlet data, restricted to radial functions.
"""

from .config import RunConfig, load_config
from .continuation import (
    Branch,
    Family,
    asymptotics_check,
    branch_tangent,
    continue_branch,
    detect_bifurcations,
    nonexistence_probe,
    switch_branch,
    trace_branch,
)
from .coupled import (
    NodalSignature,
    StatePair,
    circle_solutions,
    coupled_morse_index,
    h_beta_form,
    jacobian,
    map_T,
    newton_solve,
    residual,
    semitrivial_point,
    signature,
    synchronized_point,
)
from .grid import RadialFunction, RadialGrid, assemble_operator, inner_products, make_grid, nodal_count
from .report import cmd_compare_nodal, cmd_verify
from .scalar import ScalarSolution, find_w, scalar_morse_index, shoot
from .spectral import BifurcationTable, Spectrum, bifurcation_table, moebius, weighted_eigs

__version__ = "0.1.0"

__all__ = [
    "Branch", "BifurcationTable", "Family", "NodalSignature", "RadialFunction", "RadialGrid", "RunConfig",
    "ScalarSolution", "Spectrum", "StatePair", "assemble_operator", "asymptotics_check", "bifurcation_table",
    "branch_tangent", "circle_solutions", "cmd_compare_nodal", "cmd_verify", "continue_branch",
    "coupled_morse_index", "detect_bifurcations", "find_w", "h_beta_form", "inner_products", "jacobian",
    "load_config", "make_grid", "map_T", "moebius", "newton_solve", "nodal_count", "nonexistence_probe",
    "residual", "scalar_morse_index", "semitrivial_point", "shoot", "signature", "switch_branch",
    "synchronized_point", "trace_branch", "weighted_eigs",
]
