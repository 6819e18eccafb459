"""Stochastic Galerkin FEM with variational multiscale stabilization for the
1D stochastic advection-diffusion equation."""

from .analysis import (
    DiscretizationLadder,
    McReference,
    analytic_reference_coeffs,
    ladder_distances,
    mc_reference,
    nodal_coefficient_errors,
    run_ladder,
    v_norm,
)
from .deterministic import GreensKernel, exact_solution, solve_realization, tau
from .errors import ConfigurationError, SolverError, UnsupportedConfigurationError
from .fem import Mesh1D
from .finescale import FineScaleOperator, SourceSpec, locality_metrics, render_grids
from .gpc import GpcBasis, StochasticQuadrature, enumerate_indices
from .problem import AdeProblem, BetaField, Region, equal_regions_field, single_region_field
from .sgfem import CoefficientField, CoupledSystem, assemble, solve, solve_problem

__version__ = "0.1.0"

__all__ = [
    "AdeProblem",
    "BetaField",
    "CoefficientField",
    "ConfigurationError",
    "CoupledSystem",
    "DiscretizationLadder",
    "FineScaleOperator",
    "GpcBasis",
    "GreensKernel",
    "McReference",
    "Mesh1D",
    "Region",
    "SolverError",
    "SourceSpec",
    "StochasticQuadrature",
    "UnsupportedConfigurationError",
    "analytic_reference_coeffs",
    "assemble",
    "enumerate_indices",
    "equal_regions_field",
    "exact_solution",
    "ladder_distances",
    "locality_metrics",
    "mc_reference",
    "nodal_coefficient_errors",
    "render_grids",
    "run_ladder",
    "single_region_field",
    "solve",
    "solve_problem",
    "solve_realization",
    "tau",
    "v_norm",
]
