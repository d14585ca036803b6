"""Weak residual, energy and damped Newton solver for the boundary reaction problem.

The discretisation is variational: the residual is the exact gradient of the
discrete energy

    E(u) = int mu(x) Lambda(|grad u|) + int G(x, u) - int_{x=0} F(u)

with ``Lambda' (t) = A(t) t``, ``G_u = g`` and ``F' = f``, so the Newton
matrix is its Hessian and is symmetric by construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Field, HalfSpaceGrid
from .nonlinearities import BoundaryReaction, InteriorReaction, interior_reaction, lipschitz_estimate
from .weights import B_coefficients, WeightModel, eval_a

log = logging.getLogger(__name__)


class SingularJacobian(RuntimeError):
    def __init__(self, message, smallest_pivot):
        super().__init__(f"{message} (smallest pivot {smallest_pivot:.3e})")
        self.smallest_pivot = smallest_pivot


@dataclass(frozen=True)
class NeumannZero:
    """Homogeneous natural condition on every far-field face."""


@dataclass(frozen=True)
class DirichletProfile:
    """Prescribe ``profile(y1, ..., yn, x)`` on the chosen far-field faces."""

    profile: Callable
    faces: object = "all"


@dataclass(frozen=True)
class NewtonOptions:
    max_iter: int = 30
    tol: float = 1e-10
    damping: float = 1.0
    min_step: float = 2.0 ** -10
    #: "direct", "iterative" or "auto" (direct below ``direct_limit`` free nodes)
    linear_solver: str = "auto"
    direct_limit: int = 30000


@dataclass(frozen=True)
class Scenario:
    weight: WeightModel
    f: BoundaryReaction
    g: InteriorReaction = field(default_factory=lambda: interior_reaction("zero"))
    far_field_bc: object = field(default_factory=NeumannZero)
    newton: NewtonOptions = field(default_factory=NewtonOptions)

    def with_newton(self, **kw):
        return replace(self, newton=replace(self.newton, **kw))

    def dirichlet_mask(self, grid):
        if isinstance(self.far_field_bc, DirichletProfile):
            return grid.face_mask(self.far_field_bc.faces)
        return np.zeros(grid.shape, dtype=bool)

    def check_structure(self, u_lo, u_hi, x_extent, bound=1e8):
        """Sampled versions of the local Lipschitz and boundedness assumptions.

        Returns a list of human readable violations (empty when fine).
        """
        issues = []
        if not np.isfinite(lipschitz_estimate(self.f.f, u_lo, u_hi)):
            issues.append("f is not Lipschitz on the sampled range")
        xs = np.linspace(0.0, x_extent, 257)[1:]
        g0 = np.abs(self.g.g(xs, np.zeros_like(xs)))
        if not np.all(np.isfinite(g0)) or g0.max(initial=0.0) > bound:
            issues.append("g(., 0) is not bounded on (0, x_extent)")
        return issues


@dataclass
class SolveReport:
    iterations: int
    final_residual_norm: float
    converged: bool
    energy_integral: float
    residual_history: list = field(default_factory=list)
    smallest_pivot: float = np.nan
    flags: list = field(default_factory=list)


# -- discrete energy and its derivatives ---------------------------------------


def _quad_state(u, s):
    fe = u.grid.fe
    v = u.values.ravel()
    grad = fe.gradient_at_quad(v)
    return fe, v, grad


def energy(u, s):
    """Discrete energy whose gradient is :func:`weak_residual`."""
    fe, v, grad = _quad_state(u, s)
    t = np.sqrt(np.sum(grad * grad, axis=1))
    bulk = np.sum(fe.w_mu * fe.mu_q * s.weight.flux_primitive(t))
    pot = np.sum(fe.w * s.g.G(fe.xq, fe.value @ v))
    bd = np.sum(fe.w_boundary * s.f.F(fe.boundary @ v))
    return float(bulk + pot - bd)


def weak_residual(u, s):
    """Nodal residual ``int a grad u . grad xi_i + int g xi_i - int_{x=0} f(u) xi_i``.

    Returned with the grid's node shape; Dirichlet nodes are *not* masked.
    """
    fe, v, grad = _quad_state(u, s)
    t = np.sqrt(np.sum(grad * grad, axis=1))
    flux = (fe.w_mu * fe.mu_q * s.weight.A(t))[:, None] * grad
    r = sum(G.T @ flux[:, k] for k, G in enumerate(fe.grads))
    r = r + fe.value.T @ (fe.w * s.g.g(fe.xq, fe.value @ v))
    r = r - fe.boundary.T @ (fe.w_boundary * s.f.f(fe.boundary @ v))
    return r.reshape(u.grid.shape)


def form_parts(u, s):
    """Sparse matrices of the bulk, potential and boundary parts of the second variation."""
    fe, v, grad = _quad_state(u, s)
    K = fe.stiffness(B_coefficients(s.weight, fe.mu_q, grad))
    M_g = fe.mass(s.g.g_u(fe.xq, fe.value @ v))
    M_f = fe.boundary_mass(s.f.f_prime(fe.boundary @ v))
    return K, M_g, M_f


def jacobian(u, s):
    K, M_g, M_f = form_parts(u, s)
    return sp.csr_matrix(K + M_g - M_f)


def energy_integral(u, s):
    """``int a(x, |grad u|) |grad u|^2`` over the truncated box."""
    fe, v, grad = _quad_state(u, s)
    t2 = np.sum(grad * grad, axis=1)
    return float(np.sum(fe.w_mu * fe.mu_q * s.weight.A(np.sqrt(t2)) * t2))


# -- Newton ----------------------------------------------------------------------


def apply_dirichlet(u, s):
    mask = s.dirichlet_mask(u.grid)
    if mask.any():
        prof = np.broadcast_to(s.far_field_bc.profile(*u.grid.coords()), u.grid.shape)
        u.values[mask] = prof[mask]
    return mask


def _factor(J):
    try:
        lu = spla.splu(sp.csc_matrix(J), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SingularJacobian(str(exc), 0.0) from exc
    piv = np.abs(lu.U.diagonal())
    small, large = float(piv.min()), float(piv.max())
    if not np.isfinite(small) or small <= 1e3 * np.finfo(float).eps * large:
        raise SingularJacobian("Newton matrix is numerically singular", small)
    return lu, small


def _iterative_solve(J, rhs, K_spd, rtol):
    """MINRES on the symmetric Newton matrix, preconditioned by multigrid on an SPD companion."""
    ml = pyamg.smoothed_aggregation_solver(sp.csr_matrix(K_spd), symmetry="symmetric", max_coarse=500)
    x, info = spla.minres(J, rhs, M=ml.aspreconditioner(cycle="V"), rtol=rtol, maxiter=2000)
    if info != 0:
        log.warning("MINRES stopped without reaching rtol=%.1e (info=%d)", rtol, info)
    return x


def newton_solve(s, initial, *, callback=None):
    """Damped Newton iteration on the free (non-Dirichlet) nodes.

    Each step halves its length until the residual norm decreases; if the
    step would drop below ``newton.min_step`` the best iterate so far is
    returned with ``converged=False``.
    """
    u = initial.copy()
    fixed = apply_dirichlet(u, s).ravel()
    free = ~fixed
    opts = s.newton
    if opts.linear_solver not in ("auto", "direct", "iterative"):
        raise ValueError(f"unknown linear solver {opts.linear_solver!r}")
    direct = opts.linear_solver == "direct" or (
        opts.linear_solver == "auto" and np.count_nonzero(free) <= opts.direct_limit)

    def res_norm(w):
        return float(np.linalg.norm(weak_residual(w, s).ravel()[free]))

    norm = res_norm(u)
    history = [norm]
    report = SolveReport(0, norm, False, np.nan, history)
    if not direct:
        report.flags.append("iterative linear solver")
    for it in range(1, opts.max_iter + 1):
        report.iterations = it
        if not np.isfinite(norm):
            report.flags.append("nonfinite residual")
            break
        if norm <= opts.tol:
            report.converged = True
            break
        K, M_g, M_f = form_parts(u, s)
        J = sp.csr_matrix(K + M_g - M_f)[free][:, free]
        r = weak_residual(u, s).ravel()[free]
        if direct:
            lu, piv = _factor(J)
            report.smallest_pivot = piv if np.isnan(report.smallest_pivot) else min(piv, report.smallest_pivot)
            delta = -lu.solve(r)
        else:
            fe = u.grid.fe
            v = u.values.ravel()
            gu = np.abs(s.g.g_u(fe.xq, fe.value @ v))
            fp = np.abs(s.f.f_prime(fe.boundary @ v))
            spd = sp.csr_matrix(K + fe.mass(gu) + fe.boundary_mass(fp))[free][:, free]
            # inexact Newton: forcing term shrinks with the residual
            delta = -_iterative_solve(J, r, spd, max(1e-12, min(1e-4, norm)))
        step = opts.damping
        while True:
            trial = u.copy()
            trial.values.ravel()[free] += step * delta
            tnorm = res_norm(trial)
            if tnorm < norm:
                break
            step *= 0.5
            if step < opts.min_step:
                report.flags.append("line search failed")
                break
        if "line search failed" in report.flags:
            break
        u, norm = trial, tnorm
        history.append(norm)
        if callback is not None:
            callback(it, u, norm)
        log.debug("newton %d: |r| = %.3e (step %.3g)", it, norm, step)
    else:
        report.flags.append("max_iter reached")
    report.final_residual_norm = norm
    report.converged = report.converged or norm <= opts.tol
    report.energy_integral = energy_integral(u, s)
    return u, report


# -- flux defect --------------------------------------------------------------------


def boundary_flux_check(u, s):
    """Sup over the face ``x = 0`` of ``|-a u_x - f(u)|`` with a one-sided ``u_x``.

    ``a`` is evaluated at half the first graded height since ``mu`` may
    degenerate on the face itself.
    """
    g = u.grid
    x1 = g.x_nodes[1]
    u0, u1 = u.values[..., 0], u.values[..., 1]
    ux = (u1 - u0) / x1
    gy2 = np.zeros_like(u0)
    for j in range(g.n):
        d0 = np.gradient(u0, g.hy, axis=j, edge_order=2)
        d1 = np.gradient(u1, g.hy, axis=j, edge_order=2)
        gy2 += (0.5 * (d0 + d1)) ** 2
    a = eval_a(s.weight, 0.5 * x1, np.sqrt(gy2 + ux * ux))
    return float(np.max(np.abs(-a * ux - s.f.f(u0))))
