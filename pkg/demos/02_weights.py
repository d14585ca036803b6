"""Diffusion weights a(x, t) = x^alpha A(t): the structural checks.

The degenerate factor x^alpha must be a Muckenhoupt A2 weight, the growth
ratio t |A'(t)| / A(t) must stay bounded, and the linearisation matrix must
have the eigenvalues a (transverse) and a + a_t |eta| (along eta).
"""

import numpy as np

from boundary_reaction import (WeightModel, assemble_B, check_ellipticity, check_growth_bound,
                               check_muckenhoupt, eval_a, eval_a_t)

print("A2 constant of x^alpha on (0, 1] against 1 / (1 - alpha^2)")
for alpha in (-0.5, 0.0, 0.5, 0.9):
    model = WeightModel.p_laplacian(2.0, alpha)
    print(f"  alpha={alpha:+.1f}  computed {check_muckenhoupt(model, 1.0, 1.0):.12f}"
          f"  closed form {1 / (1 - alpha * alpha):.12f}")

print("growth ratio sup t|A'|/A")
for name, model in [("p=1.5", WeightModel.p_laplacian(1.5)), ("p=3", WeightModel.p_laplacian(3.0)),
                    ("mean curvature", WeightModel.mean_curvature())]:
    print(f"  {name:15s} {check_growth_bound(model, 10.0):.6f}")

model = WeightModel.p_laplacian(3.0, 0.3)
x, eta = 0.7, np.array([0.3, -1.2, 0.5])
t = np.linalg.norm(eta)
B = assemble_B(model, x, eta)
print("eigenvalues of B:", np.linalg.eigvalsh(B))
print("expected        :", sorted([eval_a(model, x, t)] * 2 + [eval_a(model, x, t) + eval_a_t(model, x, t) * t]))

# lambda = a + a_t |grad_y u|^2 / |grad u| weights the tangential term of the
# Poincare inequality; for a purely vertical gradient it reduces to a.
print("ellipticity at grad = (0, 1):", check_ellipticity(WeightModel.p_laplacian(3.0), 1.0, [0.0, 1.0]))
