"""Finite-difference geometry of the level sets of ``y -> u(y, x)``.

All derivatives are centred second-order differences (one-sided second order
on the box faces, via :func:`numpy.gradient`).  Derived fields are differenced
again rather than assembled from closed-form Hessian expressions, so the
curvature identities hold only up to discretisation error and their
residuals measure it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .grid import Field

#: regular set threshold relative to ``max |grad_y u|``
REGULAR_REL = 1e-6


@dataclass
class GeometryFields:
    grid: object
    grad: np.ndarray              # (..., n+1)
    grad_y: np.ndarray            # (..., n)
    regular_mask: np.ndarray      # |grad_y u| > eps_reg
    eps_reg: float
    gamma: np.ndarray = None      # |grad_y u|
    valid_mask: np.ndarray = None  # regular and the whole stencil regular and sign consistent
    hess: np.ndarray = None       # hess[..., j, k] = d_k u_{y_j}
    grad_gamma: np.ndarray = None  # (grad_y |grad_y u|, d_x |grad_y u|)
    total_curvature: np.ndarray = None
    kappa: np.ndarray = None
    tangential_grad: np.ndarray = None
    tangential_grad_norm: np.ndarray = None
    hstar: np.ndarray = None
    h1: np.ndarray = None
    h2: np.ndarray = None

    @property
    def n(self):
        return self.grad_y.shape[-1]

    @property
    def skipped(self):
        """Regular nodes dropped because their stencil touches the singular set."""
        if self.valid_mask is None:
            return 0
        return int(np.count_nonzero(self.regular_mask & ~self.valid_mask))

    def second_derivative_scale(self):
        if self.hess is None:
            return 0.0
        h = np.abs(self.hess[self.regular_mask]) if self.regular_mask.any() else np.zeros(1)
        return float(h.max(initial=0.0))

    def to_csv(self, path):
        g = self.grid
        cols = np.meshgrid(*g.axes(), indexing="ij")
        names = [f"y{j + 1}" for j in range(g.n)] + ["x"]
        data = [c.ravel() for c in cols]
        for k in range(g.dim):
            names.append(f"grad_{k}")
            data.append(self.grad[..., k].ravel())
        names.append("regular")
        data.append(self.regular_mask.ravel().astype(float))
        for name in ("total_curvature", "tangential_grad_norm", "hstar", "h1", "h2"):
            arr = getattr(self, name)
            if arr is not None:
                names.append(name)
                data.append(arr.ravel())
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in zip(*data):
                w.writerow([format(v, ".17g") for v in row])


def _diff(values, grid, axis):
    spacing = grid.hy if axis < grid.n else grid.x_nodes
    return np.gradient(values, spacing, axis=axis, edge_order=2)


def _stencil_min(values, axis):
    """Minimum of ``values`` over the difference stencil used by ``np.gradient``."""
    out = values.copy()
    m = values.shape[axis]

    def take(sl):
        idx = [slice(None)] * values.ndim
        idx[axis] = sl
        return tuple(idx)

    out[take(slice(1, m - 1))] = np.minimum.reduce(
        [values[take(slice(0, m - 2))], values[take(slice(1, m - 1))], values[take(slice(2, m))]])
    out[take(0)] = np.min(values[take(slice(0, 3))], axis=axis)
    out[take(m - 1)] = np.min(values[take(slice(m - 3, m))], axis=axis)
    return out


def _pair_alignment(nu, axis):
    """Smallest ``nu(i) . nu(j)`` over stencil neighbours ``j`` of ``i`` along ``axis``."""
    m = nu.shape[axis]
    out = np.full(nu.shape[:-1], np.inf)

    def dot_shift(k):
        # nu(i) . nu(i + k), with nan where i + k is outside
        rolled = np.roll(nu, -k, axis=axis)
        d = np.sum(nu * rolled, axis=-1)
        idx = [slice(None)] * d.ndim
        if k > 0:
            idx[axis] = slice(m - k, m)
        else:
            idx[axis] = slice(0, -k)
        d[tuple(idx)] = np.inf
        return d

    for k in (-1, 1):
        out = np.minimum(out, np.nan_to_num(dot_shift(k), nan=-np.inf))
    for k, edge in ((2, 0), (-2, m - 1)):
        d = np.nan_to_num(dot_shift(k), nan=-np.inf)
        idx = [slice(None)] * d.ndim
        idx[axis] = edge
        out[tuple(idx)] = np.minimum(out[tuple(idx)], d[tuple(idx)])
    return out


def compute_gradients(u, eps_reg=None):
    """Gradient, lateral gradient and regular set of a nodal field."""
    g = u.grid
    if min(g.shape) < 3:
        raise ValueError("grid needs at least 3 nodes per axis")
    grad = np.stack([_diff(u.values, g, k) for k in range(g.dim)], axis=-1)
    grad_y = grad[..., : g.n]
    gamma = np.sqrt(np.sum(grad_y * grad_y, axis=-1))
    if eps_reg is None:
        eps_reg = REGULAR_REL * float(gamma.max(initial=0.0))
    regular = gamma > eps_reg if gamma.max(initial=0.0) > 0 else np.zeros(g.shape, dtype=bool)
    return GeometryFields(g, grad, grad_y, regular, float(eps_reg), gamma=gamma)


def geometry_fields(u, eps_reg=None):
    """All level-set quantities; entries outside ``valid_mask`` are NaN."""
    gf = compute_gradients(u, eps_reg)
    g = u.grid
    n, d = g.n, g.dim
    gamma, reg = gf.gamma, gf.regular_mask

    hess = np.stack([np.stack([_diff(gf.grad_y[..., j], g, k) for k in range(d)], axis=-1)
                     for j in range(n)], axis=-2)  # (..., n, d)
    safe = np.where(reg, gamma, 1.0)
    nu = np.where(reg[..., None], gf.grad_y / safe[..., None], np.nan)

    valid = reg.copy()
    for k in range(n):
        valid &= _stencil_min(reg.astype(float), k) > 0
        valid &= _pair_alignment(nu, k) > 0

    gamma_y = np.stack([_diff(gamma, g, k) for k in range(n)], axis=-1)
    # d_x |grad_y u| through the chain rule keeps H_* >= 0 exactly (Cauchy-Schwarz)
    u_xy = hess[..., :, n]
    gamma_x = np.sum(nu * u_xy, axis=-1)
    grad_gamma = np.concatenate([gamma_y, gamma_x[..., None]], axis=-1)

    if n == 2:
        kappa = (_diff(nu[..., 0], g, 0) + _diff(nu[..., 1], g, 1))[..., None]
    else:
        kappa = np.zeros(g.shape + (0,))
    K = np.sqrt(np.sum(kappa * kappa, axis=-1))

    tang = gamma_y - np.sum(gamma_y * nu, axis=-1)[..., None] * nu
    tnorm = np.sqrt(np.sum(tang * tang, axis=-1))
    hstar = -gamma_x ** 2 + np.sum(u_xy * u_xy, axis=-1)
    h1 = np.sum(grad_gamma ** 2, axis=-1) - np.sum(hess * hess, axis=(-2, -1))
    grad_full = gf.grad
    h2 = np.sum(grad_full * grad_gamma, axis=-1) ** 2 - np.sum(
        np.einsum("...k,...jk->...j", grad_full, hess) ** 2, axis=-1)

    nan = ~valid
    for arr in (K, tnorm, hstar, h1, h2):
        arr[nan] = np.nan
    kappa[nan] = np.nan
    tang[nan] = np.nan
    grad_gamma[nan] = np.nan

    gf.valid_mask = valid
    gf.hess = hess
    gf.grad_gamma = grad_gamma
    gf.kappa = kappa
    gf.total_curvature = K
    gf.tangential_grad = tang
    gf.tangential_grad_norm = tnorm
    gf.hstar = hstar
    gf.h1 = h1
    gf.h2 = h2
    return gf


def tangential_projection(grad_y_u, grad_y_G):
    """``grad_y G - (grad_y G . nu) nu`` with ``nu = grad_y u / |grad_y u|``."""
    a = np.asarray(grad_y_u, dtype=float)
    b = np.asarray(grad_y_G, dtype=float)
    norm = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("tangential gradient is undefined where grad_y u = 0")
    nu = a / norm
    return b - np.sum(b * nu, axis=-1, keepdims=True) * nu


def tangential_gradient(u, G, node, eps_reg=None):
    """Tangential gradient of the field ``G`` along the level set of ``u`` through ``node``."""
    gf = compute_gradients(u, eps_reg)
    node = tuple(node)
    if not gf.regular_mask[node]:
        raise ValueError(f"node {node} is not in the regular set")
    gy = np.array([_diff(G.values, G.grid, k)[node] for k in range(u.grid.n)])
    return tangential_projection(gf.grad_y[node], gy)


def level_set_curvature(u, node, fields=None):
    """Principal curvatures and total curvature of the level set through ``node``."""
    gf = fields if fields is not None else geometry_fields(u)
    node = tuple(node)
    if not gf.regular_mask[node]:
        raise ValueError(f"node {node} is not in the regular set")
    if u.grid.n == 1:
        return np.zeros(0), 0.0
    if not gf.valid_mask[node]:
        raise ValueError(f"node {node} is next to the singular set; curvature stencil is unusable")
    return gf.kappa[node].copy(), float(gf.total_curvature[node])


def _sup(values, fields, mask):
    sel = fields.valid_mask if mask is None else fields.valid_mask & mask
    vals = np.abs(values[sel])
    return float(vals.max(initial=0.0))


@dataclass
class IdentityResidual:
    value: float
    nodes: int
    skipped: int


def identity_A3_residual(u, mask=None, fields=None):
    """Sup of ``|H_1 + H_* + K^2 |grad_y u|^2 + |grad_L |grad_y u||^2|``.

    ``mask`` optionally restricts the sup to a subregion (e.g. away from an
    isolated critical point, where stencils do not resolve the curvature).
    """
    gf = fields if fields is not None else geometry_fields(u)
    res = gf.h1 + gf.hstar + gf.total_curvature ** 2 * gf.gamma ** 2 + gf.tangential_grad_norm ** 2
    sel = gf.valid_mask if mask is None else gf.valid_mask & mask
    return IdentityResidual(_sup(res, gf, mask), int(np.count_nonzero(sel)), gf.skipped)


def decomposition_residuals(u, mask=None, fields=None):
    """Sup residuals of the x/y splitting of ``H_2`` and of its tangential form."""
    gf = fields if fields is not None else geometry_fields(u)
    n = gf.n
    gy = gf.grad_y
    ux = gf.grad[..., n]
    gamma_y = gf.grad_gamma[..., :n]
    a = np.sum(gy * gamma_y, axis=-1) ** 2
    b = np.sum(np.einsum("...k,...jk->...j", gy, gf.hess[..., :, :n]) ** 2, axis=-1)
    res_a1 = gf.h2 + ux ** 2 * gf.hstar - (a - b)
    res_a2 = a - b + gf.gamma ** 2 * gf.tangential_grad_norm ** 2
    return _sup(res_a1, gf, mask), _sup(res_a2, gf, mask)
