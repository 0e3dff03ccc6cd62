"""Chatterjee's xi and Spearman's footrule for bivariate copulas.

Submodules
----------
numerics   quadrature, root finding, normal functions, convex projections
gridcop    midpoint-grid representation and grid measures
families   analytic copula families
twoparam   strip copula family and its parameter path
boundary   curves bounding the attainable (xi, psi) region
optimize   discretized lower-boundary program and family searches
cli        command-line entry point
"""

from .gridcop import GridCopula, MeasureReport, grid_from_partial, grid_measures, psi_grid, tau_grid, xi_grid

__version__ = "0.1.0"

__all__ = [
    "GridCopula",
    "MeasureReport",
    "grid_from_partial",
    "grid_measures",
    "psi_grid",
    "tau_grid",
    "xi_grid",
]
