"""Diffusion coefficients ``a(x, t) = mu(x) * A(t)`` and their structural checks.

The lateral weight is always the pure power ``mu(x) = x**alpha``.  The gradient
factor ``A`` is one of

* ``p_laplacian``     A(t) = t**(p - 2)
* ``mean_curvature``  A(t) = (1 + t**2)**(-1/2)
* ``tabulated``       monotone cubic interpolation of user supplied samples

Every evaluation clamps the gradient magnitude from below by ``grad_floor``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

KINDS = ("p_laplacian", "mean_curvature", "tabulated")

#: relative step of the centred difference used for tabulated ``A'(t)``
TABULATED_DIFF_STEP = 1e-6


class WeightError(ValueError):
    """Invalid weight parameters."""


class WeightDivergenceError(ArithmeticError):
    """Raised when an A2 integral diverges (alpha outside (-1, 1))."""


@dataclass(frozen=True, eq=False)
class WeightModel:
    kind: str = "p_laplacian"
    p: float = 2.0
    alpha: float = 0.0
    grad_floor: float = 1e-10
    t_table: tuple = ()
    a_table: tuple = ()
    _interp: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        errors = validate_weight_params(self.kind, self.p, self.alpha, self.grad_floor,
                                        self.t_table, self.a_table)
        if errors:
            raise WeightError("; ".join(errors))
        if self.kind == "tabulated":
            t = np.asarray(self.t_table, dtype=float)
            a = np.asarray(self.a_table, dtype=float)
            object.__setattr__(self, "_interp", PchipInterpolator(t, a, extrapolate=False))

    @classmethod
    def p_laplacian(cls, p, alpha=0.0, grad_floor=1e-10):
        return cls("p_laplacian", p=p, alpha=alpha, grad_floor=grad_floor)

    @classmethod
    def mean_curvature(cls, alpha=0.0, grad_floor=1e-10):
        return cls("mean_curvature", p=np.nan, alpha=alpha, grad_floor=grad_floor)

    @classmethod
    def tabulated(cls, t_table, a_table, alpha=0.0, grad_floor=1e-10):
        return cls("tabulated", p=np.nan, alpha=alpha, grad_floor=grad_floor,
                   t_table=tuple(t_table), a_table=tuple(a_table))

    @property
    def is_linear(self):
        return self.kind == "p_laplacian" and self.p == 2.0

    def with_floor(self, grad_floor):
        return WeightModel(self.kind, self.p, self.alpha, grad_floor, self.t_table, self.a_table)

    # -- the two factors -------------------------------------------------

    def mu(self, x):
        x = np.asarray(x, dtype=float)
        if self.alpha == 0.0:
            return np.ones_like(x)
        return x ** self.alpha

    def clamp(self, t):
        return np.maximum(np.asarray(t, dtype=float), self.grad_floor)

    def A(self, t):
        """Gradient factor at ``max(t, grad_floor)``."""
        t = self.clamp(t)
        if self.kind == "p_laplacian":
            return t ** (self.p - 2.0)
        if self.kind == "mean_curvature":
            return 1.0 / np.sqrt(1.0 + t * t)
        return self._tab(t)

    def A_t(self, t):
        """Derivative of the gradient factor at ``max(t, grad_floor)``."""
        t = self.clamp(t)
        if self.kind == "p_laplacian":
            return (self.p - 2.0) * t ** (self.p - 3.0)
        if self.kind == "mean_curvature":
            return -t * (1.0 + t * t) ** -1.5
        h = TABULATED_DIFF_STEP * np.maximum(t, 1.0)
        return (self._tab(t + h) - self._tab(np.maximum(t - h, self.grad_floor))) / (
            t + h - np.maximum(t - h, self.grad_floor))

    def _tab(self, t):
        lo, hi = self.t_table[0], self.t_table[-1]
        return self._interp(np.clip(t, lo, hi))

    def flux_primitive(self, t):
        """Return ``int_0^t A(max(s, floor)) s ds`` (the energy density divided by mu)."""
        t = np.abs(np.asarray(t, dtype=float))
        eps = self.grad_floor
        below = 0.5 * self.A(eps) * np.minimum(t, eps) ** 2
        s = np.maximum(t, eps)
        if self.kind == "p_laplacian":
            p = self.p
            above = (s ** p - eps ** p) / p
        elif self.kind == "mean_curvature":
            # sqrt(1+s^2) - sqrt(1+eps^2) without cancellation
            above = (s * s - eps * eps) / (np.sqrt(1 + s * s) + np.sqrt(1 + eps * eps))
        else:
            def piece(tt):
                val, _ = integrate.quad(lambda r: float(self.A(r)) * r, eps, tt,
                                        epsabs=0.0, epsrel=1e-12, limit=200)
                return val
            above = np.vectorize(piece, otypes=[float])(s)
        return below + above


def validate_weight_params(kind, p, alpha, grad_floor, t_table=(), a_table=()):
    """Return every violated constraint as a message (empty list when valid)."""
    errors = []
    if kind not in KINDS:
        errors.append(f"weight kind must be one of {KINDS}, got {kind!r}")
        return errors
    if kind == "p_laplacian" and not (np.isfinite(p) and p > 1.0):
        errors.append("p must exceed 1")
    if kind != "tabulated" and not (-1.0 < alpha < 1.0):
        errors.append("alpha must lie strictly inside (-1,1)")
    if not (grad_floor > 0.0):
        errors.append("grad_floor must be positive")
    if kind == "tabulated":
        t = np.asarray(t_table, dtype=float)
        a = np.asarray(a_table, dtype=float)
        if t.ndim != 1 or t.size < 2 or t.shape != a.shape:
            errors.append("tabulated weight needs matching t_table/a_table of length >= 2")
        elif np.any(np.diff(t) <= 0) or t[0] < 0:
            errors.append("t_table must be nonnegative and strictly increasing")
        elif np.any(a <= 0):
            errors.append("a_table values must be positive")
    return errors


# -- operations ------------------------------------------------------------


def eval_a(model, x, t):
    return model.mu(x) * model.A(t)


def eval_a_t(model, x, t):
    return model.mu(x) * model.A_t(t)


def assemble_B(model, x, eta):
    """Linearisation matrix ``a I + (a_t/|eta|) eta eta^T``.

    Below the gradient floor the rank-one term is dropped, which keeps the
    matrix equal to the Hessian of the regularised energy density.
    """
    eta = np.asarray(eta, dtype=float)
    t = float(np.linalg.norm(eta))
    if t == 0.0 and model.grad_floor <= 0.0:
        raise ValueError("assemble_B needs a nonzero gradient")
    a = float(eval_a(model, x, t))
    B = a * np.eye(eta.size)
    if t >= model.grad_floor and t > 0.0:
        B += float(eval_a_t(model, x, t)) / t * np.outer(eta, eta)
    return B


def B_coefficients(model, mu, grad):
    """Entries ``B_kl`` for a batch of gradients.

    ``grad`` has shape (..., d); ``mu`` broadcasts against ``grad[..., 0]``.
    Returns an array of shape (..., d, d).
    """
    t = np.sqrt(np.sum(grad * grad, axis=-1))
    A = model.A(t)
    active = t >= model.grad_floor
    rank1 = np.where(active, model.A_t(t) / np.where(active, t, 1.0), 0.0)
    d = grad.shape[-1]
    B = rank1[..., None, None] * grad[..., :, None] * grad[..., None, :]
    B += A[..., None, None] * np.eye(d)
    return np.asarray(mu)[..., None, None] * B


def check_growth_bound(model, t_max, samples=200):
    """Largest sampled value of ``t |a_t| / a`` on ``(0, t_max]``."""
    if t_max <= 0 or samples < 2:
        raise ValueError("need t_max > 0 and at least two samples")
    t_lo = max(10 * model.grad_floor, 1e-6 * t_max)
    t = np.geomspace(min(t_lo, t_max), t_max, samples)
    ratio = t * np.abs(model.A_t(t)) / model.A(t)
    return float(np.max(ratio))


def power_moment(a, b, e):
    """Closed form of ``int_a^b x**e dx`` for ``e > -1``; elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (b ** (e + 1.0) - a ** (e + 1.0)) / (e + 1.0)


def graded_nodes(length, cells, alpha):
    gamma = max(1.0, 2.0 / (1.0 + alpha)) if -1.0 < alpha < 1.0 else 1.0
    return length * (np.arange(cells + 1) / cells) ** gamma


def check_muckenhoupt(model, t, d, quad_points=64, c=0.0):
    """A2 ratio ``(int_c^d a dx)(int_c^d 1/a dx) / (d - c)^2`` at frozen ``t``.

    The integrals of ``x**alpha`` and ``x**-alpha`` are summed from exact
    per-cell moments on a mesh graded towards the origin.
    """
    alpha = model.alpha
    if not (-1.0 < alpha < 1.0):
        raise WeightDivergenceError(
            f"int x^alpha * int x^-alpha diverges near 0 for alpha={alpha}")
    if not d > c >= 0.0:
        raise ValueError("need d > c >= 0")
    nodes = c + graded_nodes(d - c, quad_points, alpha)
    nodes[-1] = d
    A = float(model.A(t))
    i_mu = np.sum(power_moment(nodes[:-1], nodes[1:], alpha)) * A
    i_inv = np.sum(power_moment(nodes[:-1], nodes[1:], -alpha)) / A
    return float(i_mu * i_inv / (d - c) ** 2)


class EllipticityValues(NamedTuple):
    h1: np.ndarray
    h2_lambda: np.ndarray


def check_ellipticity(model, x, grad):
    """Evaluate ``a + a_t u_x^2/|grad u|`` and ``a + a_t |grad_y u|^2/|grad u|``.

    ``grad`` is ``(grad_y u, u_x)`` along its last axis.  The second value is
    used as the weight ``lambda`` in the Poincare verifier.
    """
    grad = np.asarray(grad, dtype=float)
    t = np.sqrt(np.sum(grad * grad, axis=-1))
    a = eval_a(model, x, t)
    active = t >= model.grad_floor
    ratio = np.where(active, eval_a_t(model, x, t) / np.where(active, t, 1.0), 0.0)
    ux2 = grad[..., -1] ** 2
    gy2 = np.sum(grad[..., :-1] ** 2, axis=-1)
    return EllipticityValues(a + ratio * ux2, a + ratio * gy2)
