"""A stable transition layer and the geometric Poincare inequality.

The double-well reaction f(u) = u - u^3 on x = 0 supports a monotone layer
u(y1, x) connecting -1 to +1.  We solve for it with one lateral variable,
extend it to two lateral variables, check that the stability form is
nonnegative on the relaxed test space, and evaluate both sides of the
Poincare inequality for several cutoffs.  For a one-dimensional layer the
curvature side vanishes, so the inequality holds with room to spare.
"""

import math

import numpy as np

from boundary_reaction import (DirichletProfile, Field, Scenario, WeightModel, boundary_reaction,
                               build_grid, capacity_phi, capacity_scan, energy_growth_scan,
                               geometry_fields, newton_solve, poincare_sides, relaxed_stability_scan)


def profile(*c):
    return np.tanh(c[0]) + 0.0 * c[-1]


L = 60.0
s = Scenario(WeightModel.p_laplacian(2.0), boundary_reaction("cubic"),
             far_field_bc=DirichletProfile(profile, ["y1"]))

g1 = build_grid(1, L, L, 64, 48)
u1, rep1 = newton_solve(s, Field.from_function(g1, profile))
print(f"n=1 layer: {rep1.iterations} Newton steps, residual {rep1.final_residual_norm:.1e}")

g2 = build_grid(2, L, L, 64, 48)
u2, rep2 = newton_solve(s, Field(g2, np.broadcast_to(u1.values[:, None, :], g2.shape).copy()))
print(f"n=2 layer: {rep2.iterations} Newton steps ({', '.join(rep2.flags) or 'direct solver'})")

for basis in (4, 8):
    scan = relaxed_stability_scan(u2, s, basis)
    print(f"stability, {basis} splines per axis: min Rayleigh quotient {scan.min_rayleigh:.4f} {scan.flags}")

fields = geometry_fields(u2)
r = g2.radius()
cutoffs = {f"log cutoff R=e^{k}": capacity_phi(math.e ** k, g2) for k in (2, 3, 4)}
cutoffs["bump (1-(r/20)^2)+"] = Field(g2, np.clip(1 - (r / 20) ** 2, 0, None))
cutoffs["tent (1-r/30)+"] = Field(g2, np.clip(1 - r / 30, 0, None))
for name, phi in cutoffs.items():
    rep = poincare_sides(u2, phi, s, fields)
    print(f"{name:22s} lhs {rep.lhs:.3e}  rhs {rep.rhs:.6f}  holds={rep.holds}")

radii = [math.e ** k for k in (2, 3, 4)]
print("capacity ratios lhs/(log R)^2:", capacity_scan(u2, s, radii, fields))
energy = energy_growth_scan(u2, s, [math.e ** k for k in (1, 2, 3, 4)])
print(f"energy growth exponent {energy.fitted_exponent:.3f} (at most 2 for the symmetry argument)")
