"""Discretized toolkit for rate-independent systems with non-convex energies:
viscous/double-viscous solves, balanced-viscosity reconstruction, and
Tikhonov-regularized optimal control."""

from .spaces import DiscreteSpaces, TimeGrid, build_spaces, unit_spaces
from .energy import EnergyModel, Nonlinearity
from .dissipation import DissipationParams
from .solver import LoadPath, StatePath, solve_ris
from .parametrize import ParametrizedSolution, reparametrize
from .control import ControlProblem, OptimizationResult, solve_vocp

__version__ = "0.1.0"

__all__ = [
    "DiscreteSpaces", "TimeGrid", "build_spaces", "unit_spaces",
    "EnergyModel", "Nonlinearity", "DissipationParams",
    "LoadPath", "StatePath", "solve_ris",
    "ParametrizedSolution", "reparametrize",
    "ControlProblem", "OptimizationResult", "solve_vocp",
    "__version__",
]
