"""Truncated half-space grids, nodal fields and their on-disk formats.

Nodes are stored with the lateral axes ``y1..yn`` first and the height ``x``
last, so a field on an ``n = 2`` grid has shape ``(ny+1, ny+1, nx+1)``.
The lateral nodes are uniform on ``[-Y, Y]``; the heights are graded towards
the reaction boundary, ``x_i = X (i/nx)**gamma``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .weights import power_moment

_HEADER = struct.Struct("<3i3d")
_LOCAL_GL = 24


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HalfSpaceGrid:
    n: int
    y_extent: float
    x_extent: float
    ny: int
    nx: int
    alpha: float
    gamma: float
    y_nodes: np.ndarray = field(repr=False)
    x_nodes: np.ndarray = field(repr=False)
    cell_weight_moments: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.n + 1

    @property
    def shape(self):
        return (self.ny + 1,) * self.n + (self.nx + 1,)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def hy(self):
        return 2.0 * self.y_extent / self.ny

    def axes(self):
        return [self.y_nodes] * self.n + [self.x_nodes]

    def coords(self):
        """Broadcastable coordinate arrays ``(y1, ..., yn, x)``."""
        return np.meshgrid(*self.axes(), indexing="ij", sparse=True)

    def radius(self):
        """``|X| = sqrt(|y|^2 + x^2)`` at every node."""
        c = self.coords()
        return np.sqrt(sum(ci * ci for ci in c))

    def same_as(self, other):
        return (self.n, self.ny, self.nx) == (other.n, other.ny, other.nx) and np.allclose(
            [self.y_extent, self.x_extent, self.alpha],
            [other.y_extent, other.x_extent, other.alpha], rtol=0, atol=0)

    # -- lumped (nodal) quadrature -----------------------------------------

    @cached_property
    def _y_lumped(self):
        w = np.full(self.ny + 1, self.hy)
        w[[0, -1]] *= 0.5
        return w

    @cached_property
    def _x_lumped(self):
        h = np.diff(self.x_nodes)
        w = np.zeros(self.nx + 1)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w

    @cached_property
    def _x_lumped_mu(self):
        m0, m1 = self._x_local_moments[:, 0], self._x_local_moments[:, 1]
        w = np.zeros(self.nx + 1)
        w[:-1] += m0 - m1
        w[1:] += m1
        return w

    def _outer(self, wx):
        w = wx
        for _ in range(self.n):
            w = np.multiply.outer(self._y_lumped, w)
        return w

    @cached_property
    def nodal_weights(self):
        """Lumped ``int xi_i dX`` for every node."""
        return self._outer(self._x_lumped)

    @cached_property
    def nodal_mu_weights(self):
        """Lumped ``int mu(x) xi_i dX``; exact in ``x`` for the power weight."""
        return self._outer(self._x_lumped_mu)

    @cached_property
    def boundary_weights(self):
        """Lumped surface weights on the face ``x = 0`` (shape of the face)."""
        w = np.ones(())
        for _ in range(self.n):
            w = np.multiply.outer(self._y_lumped, w)
        return w

    # -- weighted Gauss rules in x -----------------------------------------

    @cached_property
    def _x_local_moments(self):
        """``M_k = int_cell x**alpha ((x - a)/h)**k dx`` for k = 0..3 per cell."""
        a, b = self.x_nodes[:-1], self.x_nodes[1:]
        h = b - a
        al = self.alpha
        M = np.empty((self.nx, 4))
        s, w = np.polynomial.legendre.leggauss(_LOCAL_GL)
        s = 0.5 * (s + 1.0)
        w = 0.5 * w
        for k in range(4):
            xs = a[:, None] + h[:, None] * s[None, :]
            M[:, k] = h * np.sum(w * s ** k * xs ** al, axis=1)
            # the first cell touches x = 0, where x**alpha is singular
            M[0, k] = h[0] ** (al + 1.0) / (al + k + 1.0)
        # exact zeroth moment everywhere
        M[:, 0] = self.cell_weight_moments
        return M

    @cached_property
    def x_rule_mu(self):
        """Two-point Gauss rule per cell for the weight ``x**alpha``."""
        M = self._x_local_moments
        a, h = self.x_nodes[:-1], np.diff(self.x_nodes)
        m0, m1, m2, m3 = (M[:, k] for k in range(4))
        det = m1 * m1 - m0 * m2
        c1 = (m3 * m0 - m2 * m1) / det
        c0 = (m2 * m2 - m3 * m1) / det
        disc = np.sqrt(c1 * c1 - 4.0 * c0)
        s1, s2 = 0.5 * (-c1 - disc), 0.5 * (-c1 + disc)
        w1 = (m1 - s2 * m0) / (s1 - s2)
        w2 = m0 - w1
        s = np.stack([s1, s2], axis=1)
        w = np.stack([w1, w2], axis=1)
        return s, w, a[:, None] + h[:, None] * s

    @cached_property
    def x_rule_plain(self):
        g = 0.5 / np.sqrt(3.0)
        s = np.tile([0.5 - g, 0.5 + g], (self.nx, 1))
        h = np.diff(self.x_nodes)
        w = np.stack([0.5 * h, 0.5 * h], axis=1)
        return s, w, self.x_nodes[:-1, None] + h[:, None] * s

    @cached_property
    def fe(self):
        return FEOperators(self)

    # -- far-field faces -----------------------------------------------------

    def face_mask(self, faces="all"):
        """Boolean node mask of the far-field faces.

        ``faces`` is ``"all"``, ``"lateral"``, ``"top"`` or an iterable of
        ``"y1"``, ``"y2"``, ``"top"``.
        """
        if isinstance(faces, str):
            faces = {"all": [f"y{j + 1}" for j in range(self.n)] + ["top"],
                     "lateral": [f"y{j + 1}" for j in range(self.n)],
                     "none": []}.get(faces, [faces])
        mask = np.zeros(self.shape, dtype=bool)
        for name in faces:
            if name == "top":
                mask[..., -1] = True
            elif name.startswith("y") and name[1:].isdigit() and 1 <= int(name[1:]) <= self.n:
                j = int(name[1:]) - 1
                idx = [slice(None)] * self.dim
                idx[j] = 0
                mask[tuple(idx)] = True
                idx[j] = -1
                mask[tuple(idx)] = True
            else:
                raise GridError(f"unknown face {name!r}")
        return mask


def build_grid(n, y_extent, x_extent, ny, nx, alpha=0.0):
    """Half-space box ``[-Y, Y]^n x [0, X]`` with heights graded by ``gamma = max(1, 2/(1+alpha))``."""
    if n not in (1, 2):
        raise GridError("lateral dimension n must be 1 or 2")
    if not (y_extent > 0 and x_extent > 0):
        raise GridError("extents must be positive")
    if ny < 4 or nx < 4:
        raise GridError("need at least 4 cells per axis")
    if not (-1.0 < alpha < 1.0):
        raise GridError("alpha must lie strictly inside (-1,1)")
    gamma = max(1.0, 2.0 / (1.0 + alpha))
    x_nodes = x_extent * (np.arange(nx + 1) / nx) ** gamma
    x_nodes[-1] = x_extent
    y_nodes = np.linspace(-y_extent, y_extent, ny + 1)
    moments = power_moment(x_nodes[:-1], x_nodes[1:], alpha)
    return HalfSpaceGrid(int(n), float(y_extent), float(x_extent), int(ny), int(nx),
                         float(alpha), gamma, y_nodes, x_nodes, moments)


def _axis_ops(nodes, s):
    """Interpolation and derivative matrices from nodes to per-cell quadrature points."""
    nc, nq = s.shape
    h = np.diff(nodes)
    rows = np.arange(nc * nq)
    cells = np.repeat(np.arange(nc), nq)
    sf = s.ravel()
    I = sp.csr_matrix((np.concatenate([1 - sf, sf]),
                       (np.concatenate([rows, rows]), np.concatenate([cells, cells + 1]))),
                      shape=(nc * nq, nc + 1))
    inv = 1.0 / h[cells]
    D = sp.csr_matrix((np.concatenate([-inv, inv]),
                       (np.concatenate([rows, rows]), np.concatenate([cells, cells + 1]))),
                      shape=(nc * nq, nc + 1))
    return I, D


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


class FEOperators:
    """Multilinear finite-element operators on a :class:`HalfSpaceGrid`.

    Two tensor quadrature sets are used: ``mu`` (Gauss rule for ``x**alpha``
    in the height, Gauss-Legendre laterally) carries the diffusion term, and
    ``plain`` (Gauss-Legendre everywhere) carries the interior reaction.
    The reaction boundary uses Gauss-Legendre on the face ``x = 0``.
    """

    def __init__(self, grid):
        self.grid = grid
        g = 0.5 / np.sqrt(3.0)
        sy = np.tile([0.5 - g, 0.5 + g], (grid.ny, 1))
        wy = np.full((grid.ny, 2), 0.5 * grid.hy)
        Iy, Dy = _axis_ops(grid.y_nodes, sy)
        self._y = (Iy, Dy, wy.ravel(), (grid.y_nodes[:-1, None] + grid.hy * sy).ravel())

        def tensor(rule):
            s, w, xq = rule
            Ix, Dx = _axis_ops(grid.x_nodes, s)
            grads = []
            for k in range(grid.dim):
                mats = [Dy if j == k else Iy for j in range(grid.n)]
                mats.append(Dx if k == grid.n else Ix)
                grads.append(_kron_all(mats))
            value = _kron_all([Iy] * grid.n + [Ix])
            weights = w.ravel()
            for _ in range(grid.n):
                weights = np.multiply.outer(wy.ravel(), weights)
            xs = np.broadcast_to(xq.ravel(), weights.shape)
            return grads, value, weights.ravel(), np.ascontiguousarray(xs).ravel()

        self.grads, self.value_mu, self.w_mu, self.x_mu = tensor(grid.x_rule_mu)
        _, self.value, self.w, self.xq = tensor(grid.x_rule_plain)
        self.mu_q = np.ones_like(self.x_mu) if grid.alpha == 0.0 else self.x_mu ** grid.alpha

        e0 = sp.csr_matrix(([1.0], ([0], [0])), shape=(1, grid.nx + 1))
        self.boundary = _kron_all([Iy] * grid.n + [e0])
        wb = np.ones(())
        for _ in range(grid.n):
            wb = np.multiply.outer(wy.ravel(), wb)
        self.w_boundary = wb.ravel()

    def gradient_at_quad(self, values):
        v = np.ravel(values)
        return np.stack([G @ v for G in self.grads], axis=-1)

    def stiffness(self, coeff):
        """Assemble ``sum_kl G_k^T diag(w_mu * coeff[:, k, l]) G_l``."""
        d = len(self.grads)
        K = None
        for k in range(d):
            for l in range(d):
                c = self.w_mu * coeff[:, k, l]
                if not np.any(c):
                    continue
                term = self.grads[k].T @ sp.diags(c) @ self.grads[l]
                K = term if K is None else K + term
        if K is None:
            K = sp.csr_matrix((self.grid.size, self.grid.size))
        return sp.csr_matrix(K)

    def mass(self, coeff):
        return sp.csr_matrix(self.value.T @ sp.diags(self.w * coeff) @ self.value)

    def boundary_mass(self, coeff):
        return sp.csr_matrix(self.boundary.T @ sp.diags(self.w_boundary * coeff) @ self.boundary)


@dataclass(eq=False)
class Field:
    grid: HalfSpaceGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridError(f"field shape {self.values.shape} != grid shape {self.grid.shape}")

    @classmethod
    def from_function(cls, grid, func):
        """Sample ``func(y1, ..., yn, x)`` at the nodes."""
        vals = np.broadcast_to(func(*grid.coords()), grid.shape)
        return cls(grid, np.array(vals, dtype=float))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)))

    def copy(self):
        return Field(self.grid, self.values.copy())

    def boundary_values(self):
        return self.values[..., 0]

    # -- serialisation --------------------------------------------------------

    def to_csv(self, path):
        g = self.grid
        cols = np.meshgrid(*g.axes(), indexing="ij")
        names = [f"y{j + 1}" for j in range(g.n)] + ["x", "value"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in zip(*(c.ravel() for c in cols), self.values.ravel()):
                w.writerow([format(v, ".17g") for v in row])

    def to_bytes(self):
        g = self.grid
        head = _HEADER.pack(g.n, g.ny, g.nx, g.y_extent, g.x_extent, g.alpha)
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data):
        n, ny, nx, Y, X, alpha = _HEADER.unpack_from(data)
        grid = build_grid(n, Y, X, ny, nx, alpha)
        vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
        if vals.size != grid.size:
            raise GridError(f"payload has {vals.size} values, grid needs {grid.size}")
        return cls(grid, vals.reshape(grid.shape).copy())

    def dump(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
