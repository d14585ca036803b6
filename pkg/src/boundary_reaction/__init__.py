"""Quasilinear boundary reaction problems on the half-space and their level-set geometry.

The equation is ``-div(a(x, |grad u|) grad u) + g(x, u) = 0`` for ``x > 0`` with
``-a u_x = f(u)`` on ``{x = 0}``, where ``a(x, t) = x**alpha * A(t)``.
"""

from .geometry import (GeometryFields, compute_gradients, decomposition_residuals,
                       geometry_fields, identity_A3_residual, level_set_curvature,
                       tangential_gradient, tangential_projection)
from .grid import Field, GridError, HalfSpaceGrid, build_grid
from .nonlinearities import boundary_reaction, interior_reaction
from .solver import (DirichletProfile, NeumannZero, NewtonOptions, Scenario, SingularJacobian,
                     SolveReport, boundary_flux_check, energy, newton_solve, weak_residual)
from .stability import (QuadraticFormReport, linearized_residual_check, quadratic_form,
                        relaxed_stability_scan, second_variation_fd_check)
from .verify import (EnergyScanReport, PoincareReport, SymmetryReport, capacity_phi,
                     capacity_scan, energy_growth_scan, poincare_sides, symmetry_detect,
                     tatay_bound_check)
from .weights import (EllipticityValues, WeightDivergenceError, WeightError, WeightModel,
                      assemble_B, check_ellipticity, check_growth_bound, check_muckenhoupt,
                      eval_a, eval_a_t)

__all__ = [
    "DirichletProfile", "EllipticityValues", "EnergyScanReport", "Field", "GeometryFields",
    "GridError", "HalfSpaceGrid", "NeumannZero", "NewtonOptions", "PoincareReport",
    "QuadraticFormReport", "Scenario", "SingularJacobian", "SolveReport", "SymmetryReport",
    "WeightDivergenceError", "WeightError", "WeightModel", "assemble_B", "boundary_flux_check",
    "boundary_reaction", "build_grid", "capacity_phi", "capacity_scan", "check_ellipticity",
    "check_growth_bound", "check_muckenhoupt", "compute_gradients", "decomposition_residuals",
    "energy", "energy_growth_scan", "eval_a", "eval_a_t", "geometry_fields",
    "identity_A3_residual", "interior_reaction", "level_set_curvature",
    "linearized_residual_check", "newton_solve", "poincare_sides", "quadratic_form",
    "relaxed_stability_scan", "second_variation_fd_check", "symmetry_detect",
    "tangential_gradient", "tangential_projection", "tatay_bound_check", "weak_residual",
]
