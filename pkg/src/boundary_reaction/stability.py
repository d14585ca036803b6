"""Second variation of the discrete energy and the relaxed stability test.

The quadratic form is

    Q(xi) = int <B(x, grad u) grad xi, grad xi> + int g_u(x, u) xi^2 - int_{x=0} f'(u) xi^2

assembled with exactly the quadrature of :func:`solver.weak_residual`, so it is
the Hessian of :func:`solver.energy`.  Stability is only probed along test
functions ``|grad_y u| phi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.interpolate import BSpline

from .geometry import compute_gradients
from .grid import Field
from .solver import energy, form_parts
from .weights import B_coefficients


@dataclass
class QuadraticFormReport:
    q_value: float
    bulk_term: float
    potential_term: float
    boundary_term: float
    min_rayleigh: float = np.nan
    basis_size: int = 0
    tol_stab: float = np.nan
    flags: list = field(default_factory=list)

    @property
    def stable(self):
        return "degenerate" in self.flags or self.min_rayleigh >= -self.tol_stab

    def as_dict(self):
        return {"q_value": self.q_value, "bulk_term": self.bulk_term,
                "potential_term": self.potential_term, "boundary_term": self.boundary_term,
                "min_rayleigh": self.min_rayleigh, "basis_size": self.basis_size,
                "tol_stab": self.tol_stab, "flags": list(self.flags)}


def _masked(xi, mask_far_field):
    v = np.array(xi.values if isinstance(xi, Field) else xi, dtype=float)
    if mask_far_field:
        grid = xi.grid
        v[grid.face_mask("all")] = 0.0
    return v


def quadratic_form(u, xi, s, mask_far_field=True, parts=None):
    """Value and split of the second variation at ``u`` in direction ``xi``."""
    K, M_g, M_f = parts if parts is not None else form_parts(u, s)
    v = _masked(xi, mask_far_field).ravel()
    bulk = float(v @ (K @ v))
    pot = float(v @ (M_g @ v))
    bd = float(v @ (M_f @ v))
    return QuadraticFormReport(bulk + pot - bd, bulk, pot, bd)


def second_variation_fd_check(u, xi, s, eps=1e-3, mask_far_field=True):
    """Relative mismatch between a central second difference of the energy and ``Q(xi)``."""
    v = _masked(xi, mask_far_field)
    if not np.any(v):
        return 0.0
    q = quadratic_form(u, Field(u.grid, v), s, mask_far_field=False).q_value
    plus = Field(u.grid, u.values + eps * v)
    minus = Field(u.grid, u.values - eps * v)
    fd = (energy(plus, s) - 2.0 * energy(u, s) + energy(minus, s)) / eps ** 2
    return abs(fd - q) / (1.0 + abs(q))


def _vanishing_bsplines(lo, hi, count, degree=3):
    """``count`` clamped B-splines on ``[lo, hi]`` that vanish at both ends."""
    if count < 1:
        raise ValueError("basis_size must be positive")
    inner = np.linspace(lo, hi, count + 2 - degree + 1) if count + 2 > degree else np.linspace(lo, hi, 2)
    knots = np.concatenate([[lo] * degree, inner, [hi] * degree])
    nb = len(knots) - degree - 1
    funcs = []
    for k in range(1, nb - 1):
        c = np.zeros(nb)
        c[k] = 1.0
        funcs.append(BSpline(knots, c, degree, extrapolate=False))
    return funcs


def phi_basis(grid, basis_size):
    """Tensor B-splines in ``y`` (zero on the lateral faces) times the taper ``(1 - x/X)^2``."""
    per_axis = [np.nan_to_num(np.array([b(grid.y_nodes) for b in
                                        _vanishing_bsplines(-grid.y_extent, grid.y_extent, basis_size)]))
                for _ in range(grid.n)]
    taper = (1.0 - grid.x_nodes / grid.x_extent) ** 2
    if grid.n == 1:
        phis = per_axis[0][:, :, None] * taper[None, None, :]
    else:
        b1, b2 = per_axis
        phis = (b1[:, None, :, None, None] * b2[None, :, None, :, None]
                * taper[None, None, None, None, :]).reshape(-1, grid.ny + 1, grid.ny + 1, grid.nx + 1)
    return phis


def relaxed_stability_scan(u, s, basis_size=8, tol_rel=1e-6, parts=None):
    """Minimum of ``Q(xi)/int_{x=0} xi^2`` over ``xi`` in ``span{|grad_y u| phi_k}``."""
    grid = u.grid
    gamma = compute_gradients(u).gamma
    phis = phi_basis(grid, basis_size)
    Xi = (gamma[None] * phis).reshape(len(phis), -1).T  # (N, m)
    Xi[grid.face_mask("all").ravel()] = 0.0
    K, M_g, M_f = parts if parts is not None else form_parts(u, s)
    Mb = grid.fe.boundary_mass(np.ones_like(grid.fe.w_boundary))

    report = QuadraticFormReport(np.nan, np.nan, np.nan, np.nan, basis_size=len(phis))
    norms = np.einsum("ik,ik->k", Xi, Mb @ Xi)
    keep = norms > 1e-12 * max(norms.max(initial=0.0), np.finfo(float).tiny)
    if not np.any(keep) or norms.max(initial=0.0) == 0.0:
        report.flags.append("degenerate")
        return report
    Xi = Xi[:, keep]
    J = K + M_g - M_f
    A = Xi.T @ (J @ Xi)
    A = 0.5 * (A + A.T)
    M = Xi.T @ (Mb @ Xi)
    M = 0.5 * (M + M.T)
    # restrict to the range of the boundary mass, then solve the pencil there
    mvals, mvecs = np.linalg.eigh(M)
    good = mvals > 1e-12 * mvals.max()
    P = mvecs[:, good] / np.sqrt(mvals[good])
    lam, vec = sla.eigh(P.T @ A @ P)
    diag_scale = np.abs(np.diag(A) / np.diag(M)).max()
    report.tol_stab = tol_rel * diag_scale
    report.min_rayleigh = float(lam[0])
    xi_min = Xi @ (P @ vec[:, 0])
    report.bulk_term = float(xi_min @ (K @ xi_min))
    report.potential_term = float(xi_min @ (M_g @ xi_min))
    report.boundary_term = float(xi_min @ (M_f @ xi_min))
    report.q_value = report.bulk_term + report.potential_term - report.boundary_term
    if np.count_nonzero(~keep):
        report.flags.append(f"dropped {int(np.count_nonzero(~keep))} annihilated basis functions")
    report.flags.append("stable" if report.min_rayleigh >= -report.tol_stab else "unstable")
    return report


def linearized_residual_check(u, s, phi):
    """Normalised defect of the differentiated equation tested with ``u_{y_j} phi^2``.

    Returns the largest, over lateral directions ``j``, of
    ``|T1 + T2 + T3 - T4| / (|T1| + |T2| + |T3| + |T4|)``.
    """
    grid = u.grid
    fe = grid.fe
    phi_v = np.ravel(phi.values if isinstance(phi, Field) else phi)
    if not np.any(phi_v):
        return 0.0
    uv = u.values.ravel()
    grad_u = fe.gradient_at_quad(uv)
    B = B_coefficients(s.weight, fe.mu_q, grad_u)
    phi_mu = fe.value_mu @ phi_v
    dphi = fe.gradient_at_quad(phi_v)
    phi_q = fe.value @ phi_v
    phi_b = fe.boundary @ phi_v
    gu = s.g.g_u(fe.xq, fe.value @ uv)
    fp = s.f.f_prime(fe.boundary @ uv)
    gf = compute_gradients(u)
    gy = gf.grad_y
    # directions where u_{y_j} is differencing roundoff carry no information
    floor = 1e-12 * float(np.abs(gf.grad).max(initial=0.0))
    worst = 0.0
    for j in range(grid.n):
        w = gy[..., j].ravel()
        if np.abs(w).max(initial=0.0) <= floor:
            continue
        dw = fe.gradient_at_quad(w)
        Bdw = np.einsum("qkl,ql->qk", B, dw)
        w_mu = fe.value_mu @ w
        t1 = np.sum(fe.w_mu * np.sum(Bdw * dw, axis=1) * phi_mu ** 2)
        t2 = np.sum(fe.w_mu * np.sum(Bdw * 2.0 * phi_mu[:, None] * dphi, axis=1) * w_mu)
        t3 = np.sum(fe.w * gu * (fe.value @ w) ** 2 * phi_q ** 2)
        t4 = np.sum(fe.w_boundary * fp * (fe.boundary @ w) ** 2 * phi_b ** 2)
        denom = abs(t1) + abs(t2) + abs(t3) + abs(t4)
        if denom > 0:
            worst = max(worst, abs(t1 + t2 + t3 - t4) / denom)
    return float(worst)
