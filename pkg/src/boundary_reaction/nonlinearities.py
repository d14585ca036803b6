"""Named registry of boundary and interior nonlinearities.

Each entry carries the function, its derivative in ``u`` and its primitive in
``u`` in closed form, so residuals, Jacobians and energies stay mutually
consistent.  New entries are added in code; configuration files can only pick
names and numeric parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class BoundaryReaction:
    """``f(u)`` acting on the face ``x = 0``."""

    name: str
    f: Callable
    f_prime: Callable
    F: Callable
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class InteriorReaction:
    """``g(x, u)`` acting in the bulk."""

    name: str
    g: Callable
    g_u: Callable
    G: Callable
    params: dict = field(default_factory=dict)


def _zero(*args):
    return np.zeros_like(np.asarray(args[-1], dtype=float))


def boundary_reaction(name, **params):
    """Build a boundary nonlinearity from the registry.

    ``zero``    f = 0
    ``linear``  f = k u                      (param ``k``, default 1)
    ``cubic``   f = c (u - u^3)              (param ``c``, default 1)
    ``power``   f = c |u|^(q-1) u            (params ``c`` = 1, ``q`` = 3)
    ``sine``    f = c sin(pi u) / pi         (param ``c``, default 1)
    """
    if name == "zero":
        return BoundaryReaction(name, _zero, _zero, _zero, {})
    if name == "linear":
        k = float(params.get("k", 1.0))
        return BoundaryReaction(name, lambda u: k * u, lambda u: k + 0.0 * u,
                                lambda u: 0.5 * k * u * u, {"k": k})
    if name == "cubic":
        c = float(params.get("c", 1.0))
        return BoundaryReaction(name, lambda u: c * (u - u ** 3), lambda u: c * (1 - 3 * u * u),
                                lambda u: c * (0.5 * u * u - 0.25 * u ** 4), {"c": c})
    if name == "power":
        c = float(params.get("c", 1.0))
        q = float(params.get("q", 3.0))
        if q < 1:
            raise ValueError("power nonlinearity needs q >= 1 to stay locally Lipschitz")
        return BoundaryReaction(
            name, lambda u: c * np.abs(u) ** (q - 1) * u,
            lambda u: c * q * np.abs(u) ** (q - 1),
            lambda u: c * np.abs(u) ** (q + 1) / (q + 1), {"c": c, "q": q})
    if name == "sine":
        c = float(params.get("c", 1.0))
        return BoundaryReaction(name, lambda u: c * np.sin(np.pi * u) / np.pi,
                                lambda u: c * np.cos(np.pi * u),
                                lambda u: c * (1 - np.cos(np.pi * u)) / np.pi ** 2, {"c": c})
    raise KeyError(f"unknown boundary nonlinearity {name!r}")


def interior_reaction(name, **params):
    """Build an interior nonlinearity ``g(x, u) = c exp(-decay x) h(u)``.

    ``h`` is ``0`` (``zero``), ``u`` (``linear``), ``u^3`` (``cubic``) or
    ``|u|^(q-1) u`` (``power``).  ``decay >= 0`` defaults to 0.
    """
    c = float(params.get("c", 1.0))
    decay = float(params.get("decay", 0.0))
    if decay < 0:
        raise ValueError("decay must be nonnegative")

    def factor(x):
        return c * np.exp(-decay * np.asarray(x, dtype=float))

    if name == "zero":
        return InteriorReaction(name, _zero, _zero, _zero, {})
    if name == "linear":
        h, hu, H = (lambda u: u), (lambda u: np.ones_like(u)), (lambda u: 0.5 * u * u)
    elif name == "cubic":
        h, hu, H = (lambda u: u ** 3), (lambda u: 3 * u * u), (lambda u: 0.25 * u ** 4)
    elif name == "power":
        q = float(params.get("q", 3.0))
        if q < 1:
            raise ValueError("power nonlinearity needs q >= 1")
        h = lambda u: np.abs(u) ** (q - 1) * u  # noqa: E731
        hu = lambda u: q * np.abs(u) ** (q - 1)  # noqa: E731
        H = lambda u: np.abs(u) ** (q + 1) / (q + 1)  # noqa: E731
    else:
        raise KeyError(f"unknown interior nonlinearity {name!r}")
    return InteriorReaction(
        name,
        lambda x, u: factor(x) * h(np.asarray(u, dtype=float)),
        lambda x, u: factor(x) * hu(np.asarray(u, dtype=float)),
        lambda x, u: factor(x) * H(np.asarray(u, dtype=float)),
        dict(params, c=c, decay=decay))


BOUNDARY_NAMES = ("zero", "linear", "cubic", "power", "sine")
INTERIOR_NAMES = ("zero", "linear", "cubic", "power")


def lipschitz_estimate(func, lo, hi, samples=2001):
    """Largest difference quotient of ``func`` on a uniform sample of ``[lo, hi]``."""
    u = np.linspace(lo, hi, samples)
    v = func(u)
    return float(np.max(np.abs(np.diff(v)) / np.diff(u)))
