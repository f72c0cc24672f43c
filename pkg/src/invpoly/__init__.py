"""Inverse polynomial optimization with sum-of-squares certificates."""

from .certify import FeasibleSet, PutinarCertificate, membership, verify
from .conic import SolverConfig
from .inverse import (InverseProblem, forward_solve, hierarchy_sweep, optimality_gap_bound,
                      solve_canonical_l1, solve_convex_quadratic, solve_inverse, solve_zero_one)
from .oracle import grid_min, sample_min
from .parser import load_problem, parse_polynomial
from .polyalg import Polynomial

__all__ = [
    "FeasibleSet", "InverseProblem", "Polynomial", "PutinarCertificate", "SolverConfig",
    "forward_solve", "grid_min", "hierarchy_sweep", "load_problem", "membership",
    "optimality_gap_bound", "parse_polynomial", "sample_min", "solve_canonical_l1",
    "solve_convex_quadratic", "solve_inverse", "solve_zero_one", "verify",
]
