"""Numerical checks of the geometric Poincare inequality and its consequences.

Integrals over the half-space use the grid's lumped nodal weights; the weight
``mu(x)`` is folded into :attr:`HalfSpaceGrid.nodal_mu_weights`, so nothing is
evaluated on the face ``x = 0`` where ``mu`` may vanish or blow up.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .geometry import compute_gradients, geometry_fields
from .grid import Field
from .weights import B_coefficients

log = logging.getLogger(__name__)


def _values(f):
    return np.asarray(f.values if isinstance(f, Field) else f, dtype=float)


def _lambda_over_mu(model, grad):
    """``lambda / mu = A + A_t |grad_y u|^2 / |grad u|`` at each node."""
    t = np.sqrt(np.sum(grad * grad, axis=-1))
    gy2 = np.sum(grad[..., :-1] ** 2, axis=-1)
    active = t >= model.grad_floor
    ratio = np.where(active, model.A_t(t) / np.where(active, t, 1.0), 0.0)
    return model.A(t) + ratio * gy2


# -- geometric Poincare inequality ----------------------------------------------


@dataclass
class PoincareReport:
    lhs: float
    rhs: float
    margin: float
    tol_poin: float
    min_lambda: float
    regular_nodes: int
    skipped_nodes: int

    @property
    def holds(self):
        return self.margin >= -self.tol_poin

    def as_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "tol_poin": self.tol_poin,
                "min_lambda": self.min_lambda, "regular_nodes": self.regular_nodes,
                "skipped_nodes": self.skipped_nodes, "holds": self.holds}


def poincare_sides(u, phi, s, fields=None, tol_rel=1e-6):
    """Both sides of the geometric Poincare inequality for the cutoff ``phi``.

    lhs = int phi^2 (a K^2 |grad_y u|^2 + lambda |grad_L |grad_y u||^2)
    rhs = int |grad_y u|^2 <B grad phi, grad phi>

    Both integrals run over the nodes where the level-set geometry is defined.
    """
    gf = fields if fields is not None else geometry_fields(u)
    grid = u.grid
    model = s.weight
    sel = gf.valid_mask
    w = grid.nodal_mu_weights[sel]
    phi_v = _values(phi)
    dphi = compute_gradients(Field(grid, phi_v)).grad[sel]
    grad = gf.grad[sel]
    gamma = gf.gamma[sel]
    t = np.sqrt(np.sum(grad * grad, axis=-1))
    lam = _lambda_over_mu(model, grad)
    curv = gf.total_curvature[sel]
    tn = gf.tangential_grad_norm[sel]
    lhs = float(np.sum(w * phi_v[sel] ** 2 * (model.A(t) * curv ** 2 * gamma ** 2 + lam * tn ** 2)))
    B = B_coefficients(model, 1.0, grad)
    quad = np.einsum("...k,...kl,...l->...", dphi, B, dphi)
    rhs = float(np.sum(w * gamma ** 2 * quad))
    return PoincareReport(
        lhs, rhs, rhs - lhs, tol_rel * abs(rhs),
        float(lam.min()) if lam.size else float("nan"),
        int(np.count_nonzero(sel)), gf.skipped)


# -- capacity cutoffs ----------------------------------------------------------------


def capacity_phi(R, grid):
    """Logarithmic cutoff: ``log R`` inside ``sqrt R``, ``2 log(R/|X|)`` up to ``R``, then 0."""
    if R < math.e:
        raise ValueError("capacity cutoff needs R >= e")
    if R > min(grid.y_extent, grid.x_extent):
        warnings.warn(f"R={R:g} exceeds the grid extent; the cutoff is truncated", RuntimeWarning,
                      stacklevel=2)
    r = grid.radius()
    with np.errstate(divide="ignore"):
        vals = np.where(r <= math.sqrt(R), math.log(R),
                        np.where(r < R, 2.0 * np.log(R / np.maximum(r, 1e-300)), 0.0))
    return Field(grid, vals)


def capacity_scan(u, s, radii, fields=None):
    """``lhs(phi_R) / (log R)^2`` for each radius."""
    radii = _check_radii(radii, minimum=1)
    gf = fields if fields is not None else geometry_fields(u)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        phis = [capacity_phi(R, u.grid) for R in radii]
    if max(radii) > min(u.grid.y_extent, u.grid.x_extent):
        log.warning("largest capacity radius %.3g exceeds the grid extent", max(radii))
    return [poincare_sides(u, phi, s, gf).lhs / math.log(R) ** 2 for R, phi in zip(radii, phis)]


def tatay_bound_check(h_values, R):
    """Annulus bound for a nonnegative density ``h``.

    lhs = int_{sqrt R < |X| < R} h / |X|^2
    rhs = 2 int_{sqrt R}^R t^-3 eta(t) dt + eta(R) / R^2,   eta(t) = int_{|X| < t} h

    ``eta`` is the cumulative nodal quadrature, a step function in ``t``,
    so the ``t`` integral is done exactly between its jumps.
    """
    grid = h_values.grid
    h = _values(h_values)
    if np.any(h < 0):
        raise ValueError("h must be nonnegative")
    if R <= 1:
        raise ValueError("need R > 1")
    r = grid.radius().ravel()
    mass = (grid.nodal_weights * h).ravel()
    lo = math.sqrt(R)
    ann = (r >= lo) & (r <= R) & (r > 0)
    lhs = float(np.sum(mass[ann] / r[ann] ** 2))

    inside = r <= R
    order = np.argsort(r[inside], kind="stable")
    rr = r[inside][order]
    eta = np.cumsum(mass[inside][order])
    # eta(t) on [rr_k, rr_{k+1}) equals eta[k]; clip the pieces to [sqrt R, R]
    left = np.clip(rr, lo, R)
    right = np.clip(np.append(rr[1:], R), lo, R)
    integral = float(np.sum(eta * 0.5 * (left ** -2.0 - right ** -2.0)))
    eta_R = float(eta[-1]) if eta.size else 0.0
    rhs = 2.0 * integral + eta_R / R ** 2
    return lhs, rhs


# -- energy growth --------------------------------------------------------------------


def _check_radii(radii, minimum=3):
    radii = [float(r) for r in radii]
    if len(radii) < minimum:
        raise ValueError(f"need at least {minimum} radii, got {len(radii)}")
    if any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] <= 0:
        raise ValueError("radii must be positive and strictly increasing")
    return radii


def weight_annulus_volume(n, alpha, R):
    """``int mu`` over the half annulus ``R < |X| < 2R`` in dimension ``n + 1``."""
    def section(rho):
        rho = max(rho, 0.0)
        return 2.0 * rho if n == 1 else math.pi * rho * rho

    def slab(x):
        return section(math.sqrt(max(4 * R * R - x * x, 0.0))) - section(math.sqrt(max(R * R - x * x, 0.0)))

    near, _ = integrate.quad(slab, 0.0, R, weight="alg", wvar=(alpha, 0.0), epsabs=0, epsrel=1e-12)
    far, _ = integrate.quad(lambda x: x ** alpha * slab(x), R, 2 * R, epsabs=0, epsrel=1e-12)
    return near + far


def _loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class EnergyScanReport:
    radii: list
    energies: list
    fitted_exponent: float
    weight_volumes: list
    weight_exponent: float
    expected_weight_exponent: float
    flags: list = field(default_factory=list)

    def as_dict(self):
        return {"radii": list(self.radii), "energies": list(self.energies),
                "fitted_exponent": self.fitted_exponent, "weight_volumes": list(self.weight_volumes),
                "weight_exponent": self.weight_exponent,
                "expected_weight_exponent": self.expected_weight_exponent, "flags": list(self.flags)}


def energy_growth_scan(u, s, radii):
    """``int_{B_R} (a + |a_t| |grad u|) |grad u|^2`` and its log-log growth rate."""
    radii = _check_radii(radii)
    grid = u.grid
    grad = compute_gradients(u).grad
    t = np.sqrt(np.sum(grad * grad, axis=-1))
    model = s.weight
    # gradients below the floor are differencing roundoff of a locally constant field
    t = np.where(t < model.grad_floor, 0.0, t)
    dens = grid.nodal_mu_weights * (model.A(t) + np.abs(model.A_t(t)) * t) * t * t
    r = grid.radius()
    energies = [float(np.sum(dens[r <= R])) for R in radii]
    flags = []
    if max(radii) > min(grid.y_extent, grid.x_extent):
        flags.append("radius exceeds grid extent")
    if min(energies) <= 0.0:
        flags.append("degenerate")
        slope = float("nan")
    else:
        slope = _loglog_slope(radii, energies)
    vols = [weight_annulus_volume(grid.n, grid.alpha, R) for R in radii]
    return EnergyScanReport(radii, energies, slope, vols, _loglog_slope(radii, vols),
                            grid.n + 1 + grid.alpha, flags)


def regularity_integrals(u, s, radii, fields=None):
    """Per-ball weighted integrals of ``u_{y_j}`` and of ``|grad_y u|`` with their gradients.

    These are finiteness hypotheses of the Poincare inequality, reported
    rather than asserted.
    """
    gf = fields if fields is not None else geometry_fields(u)
    grid = u.grid
    t = np.sqrt(np.sum(gf.grad ** 2, axis=-1))
    aw = grid.nodal_mu_weights * s.weight.A(t)
    first = aw * (np.sum(gf.hess ** 2, axis=(-2, -1)) + gf.gamma ** 2)
    gg = np.where(gf.valid_mask, np.sum(np.nan_to_num(gf.grad_gamma) ** 2, axis=-1), 0.0)
    second = aw * (gg + gf.gamma ** 2)
    r = grid.radius()
    return {"derivative_integrals": [float(first[r <= R].sum()) for R in radii],
            "gradient_norm_integrals": [float(second[r <= R].sum()) for R in radii]}


# -- one-dimensional symmetry ------------------------------------------------------------


@dataclass
class SymmetryReport:
    omega: np.ndarray              # (nx+1, n); NaN rows for empty slices
    max_angular_deviation: float
    is_one_dimensional: bool
    tol_sym: float
    slice_deviation: np.ndarray
    empty_slices: list
    flags: list = field(default_factory=list)

    def as_dict(self):
        return {"omega": self.omega.tolist(), "max_angular_deviation": self.max_angular_deviation,
                "is_one_dimensional": self.is_one_dimensional, "tol_sym": self.tol_sym,
                "slice_deviation": self.slice_deviation.tolist(),
                "empty_slices": list(self.empty_slices), "flags": list(self.flags)}


def symmetry_detect(u, tol_sym=1e-3, eps_reg=None):
    """Direction ``omega(x)`` of each horizontal slice and the worst misalignment of ``grad_y u``.

    ``omega`` is the dominant eigenvector of the structure tensor
    ``sum grad_y u (x) grad_y u`` over the regular nodes of the slice.  Nodes
    on the lateral faces are left out because their one-sided differences do
    not preserve the direction of an oblique gradient.
    """
    grid = u.grid
    gf = compute_gradients(u, eps_reg)
    nslices = grid.nx + 1
    omega = np.full((nslices, grid.n), np.nan)
    dev = np.full(nslices, np.nan)
    if grid.n == 1:
        omega[:] = 1.0
        dev[:] = 0.0
        flags = [] if gf.regular_mask.any() else ["vacuous"]
        return SymmetryReport(omega, 0.0, True, tol_sym, dev, [], flags)

    inner = gf.regular_mask & ~grid.face_mask("lateral")
    empty = []
    for i in range(nslices):
        sel = inner[..., i]
        if not sel.any():
            empty.append(i)
            continue
        g = gf.grad_y[..., i, :][sel]
        S = g.T @ g
        vals, vecs = np.linalg.eigh(S)
        w = vecs[:, -1]
        w = w if w[np.argmax(np.abs(w))] > 0 else -w
        omega[i] = w
        cross = np.abs(g[:, 0] * w[1] - g[:, 1] * w[0])
        dot = np.abs(g @ w)
        dev[i] = float(np.max(np.arctan2(cross, dot)))
    flags = []
    if len(empty) == nslices:
        flags.append("vacuous")
        return SymmetryReport(omega, 0.0, True, tol_sym, dev, empty, flags)
    if empty:
        flags.append(f"{len(empty)} slices without regular nodes")
    worst = float(np.nanmax(dev))
    return SymmetryReport(omega, worst, worst <= tol_sym, tol_sym, dev, empty, flags)


def symmetry_hypotheses(s, fields=None):
    """Which structural hypotheses of the symmetry result hold for the scenario.

    The verdict of :func:`symmetry_detect` is computed regardless; this only
    records whether it is backed by the theory.
    """
    g = s.g
    c = g.params.get("c", 0.0)
    out = {
        # sup_{|u|<=M} |g(x, u)| integrable in x: exponential decay or no g at all
        "g_integrable": g.name == "zero" or g.params.get("decay", 0.0) > 0,
        "g_sign_condition": g.name == "zero" or (g.name in ("linear", "cubic", "power") and c >= 0),
        "product_weight": True,
    }
    w = s.weight
    if w.kind == "p_laplacian":
        # bounded A (p = 2) or power growth with p >= 1 + alpha
        out["growth_condition"] = w.p == 2.0 or w.p >= 1.0 + w.alpha
    else:
        # mean curvature and tabulated (constant extrapolation) weights are bounded
        out["growth_condition"] = True
    if fields is not None and fields.regular_mask.any():
        lam = _lambda_over_mu(w, fields.grad[fields.regular_mask])
        out["min_lambda"] = float(lam.min())
        out["lambda_positive"] = bool(lam.min() > 0)
    for k, v in out.items():
        log.info("symmetry hypothesis %s: %s", k, v)
    return out
