"""Numerical lab for the discrete bilaplacian with clamped boundary values."""
from .lattice import CubeRegion, DomainError, GridFunction, LatticeDomain, discrete_norm, holder_seminorm
from .operators import bilaplacian, gradient, hessian, laplacian
from .solver import NonConvergenceError, SizeError, SolveReport, solve_bilaplacian
from .green import GreenMatrix, green_column, green_derivatives, green_matrix, green_value
from .membrane import MembraneModel, sample_field
from .verify import EstimateReport

__version__ = "0.1.0"

__all__ = [
    "CubeRegion", "DomainError", "GridFunction", "LatticeDomain", "discrete_norm", "holder_seminorm",
    "bilaplacian", "gradient", "hessian", "laplacian",
    "NonConvergenceError", "SizeError", "SolveReport", "solve_bilaplacian",
    "GreenMatrix", "green_column", "green_derivatives", "green_matrix", "green_value",
    "MembraneModel", "sample_field", "EstimateReport",
]
