"""Diffraction-managed solitons of the discrete NLS: computation and verification."""
from .dynamics import (ClosenessReport, EvolutionConfig, Trajectory, compare_averaging, evolve_averaged,
                       evolve_full)
from .functional import QuadratureRule, grad_phi, hamiltonian, phi, q_map, quad_form
from .lattice import GridFunction, inner, laplacian_apply, norm_p, shift, support, support_distance
from .propagator import DiffractionProfile, PropagatorEngine, kernel, make_engine
from .solver import SolitonResult, SolverConfig, maximize, solve

__version__ = "0.1.0"

__all__ = [
    "ClosenessReport", "DiffractionProfile", "EvolutionConfig", "GridFunction", "PropagatorEngine",
    "QuadratureRule", "SolitonResult", "SolverConfig", "Trajectory", "compare_averaging",
    "evolve_averaged", "evolve_full", "grad_phi", "hamiltonian", "inner", "kernel", "laplacian_apply",
    "make_engine", "maximize", "norm_p", "phi", "q_map", "quad_form", "shift", "solve", "support",
    "support_distance",
]
