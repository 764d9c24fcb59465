"""p-Laplace ground states on weighted graphs.

Solves ``-Delta_p u + rho |u|^{p-2} u = psi(x, u+)`` on a finite weighted
graph: Nehari ground states, mountain-pass critical points, potential-well
sweeps with their Dirichlet limit, and the first nonlinear eigenvalue.
"""

from .energy import (ConvergenceWarning, EnergyModel, LambdaEstimate, ModelError, SolveResult,
                     energy, energy_gradient, estimate_lambda_p)
from .estimators import GroundStateSolver, LambdaEstimator, MountainPassSolver, PotentialWellSweep
from .graph import (DomainSubset, GraphError, WeightedGraph, complete_graph, from_edges,
                    grid_graph, load_edge_list, path_graph, random_connected_graph)
from .mountain_pass import MountainPassConfig, PathCollapseError, mpa_solve
from .nehari import (ProjectionError, SolveError, SolverConfig, brute_force_ground_state,
                     ground_state_solve, nehari_project)
from .nonlinearity import NonlinearitySpec, pure_power, sum_of_powers, weighted_power
from .well import SweepError, WellConfig, dirichlet_ground_state, theta_sweep

__version__ = "0.1.0"

__all__ = [
    "ConvergenceWarning", "EnergyModel", "LambdaEstimate", "ModelError", "SolveResult",
    "energy", "energy_gradient", "estimate_lambda_p",
    "GroundStateSolver", "LambdaEstimator", "MountainPassSolver", "PotentialWellSweep",
    "DomainSubset", "GraphError", "WeightedGraph", "complete_graph", "from_edges", "grid_graph",
    "load_edge_list", "path_graph", "random_connected_graph",
    "MountainPassConfig", "PathCollapseError", "mpa_solve",
    "ProjectionError", "SolveError", "SolverConfig", "brute_force_ground_state",
    "ground_state_solve", "nehari_project",
    "NonlinearitySpec", "pure_power", "sum_of_powers", "weighted_power",
    "SweepError", "WellConfig", "dirichlet_ground_state", "theta_sweep",
]
