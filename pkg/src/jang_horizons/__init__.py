"""Generalized apparent horizons and MOTS on initial data sets via a regularised Jang equation."""
from .capillary_solver import ContinuationSchedule, continue_in_t, solve_fixed
from .errors import HorizonError
from .horizon_algebra import TrappedDomain, enclosing_horizon, find_horizon, outermost
from .horizon_geometry import HorizonSurface, extract_surface, read_mesh, verify_surface, write_mesh
from .initial_data import DomainGrid, Sphere, build_domain, make_family

__all__ = [
    "ContinuationSchedule", "DomainGrid", "HorizonError", "HorizonSurface", "Sphere", "TrappedDomain",
    "build_domain", "continue_in_t", "enclosing_horizon", "extract_surface", "find_horizon",
    "make_family", "outermost", "read_mesh", "solve_fixed", "verify_surface", "write_mesh",
]
