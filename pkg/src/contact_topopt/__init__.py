"""Finite-element toolkit for frictional contact problems with a regularized
slip-weakening friction law, and shape/topology optimization against them.
"""
from .errors import ConfigurationError, ContactTopoptError, InvertedElementError, SolverError
from .material import Elasticity, FrictionParams, d2j_eps, dj_eps, j_eps, mu_friction, stress, theta
from .mesh import DomainSpec, Mesh, generate_domain, mesh_quality, move_vertices, smooth_interior
from .hvi import (Compliance, Energy, General, Loads, StateSolution, evaluate_objective, solve_adjoint,
                  solve_state)
from .config import OptConfig, make_config, parse_config
from .history import History

__version__ = "0.1.0"

__all__ = [
    "Compliance", "ConfigurationError", "ContactTopoptError", "DomainSpec", "Elasticity", "Energy",
    "FrictionParams", "General", "History", "InvertedElementError", "Loads", "Mesh", "OptConfig",
    "SolverError", "StateSolution", "d2j_eps", "dj_eps", "evaluate_objective", "generate_domain", "j_eps",
    "make_config", "mesh_quality", "move_vertices", "mu_friction", "parse_config", "smooth_interior",
    "solve_adjoint", "solve_state", "stress", "theta",
]
