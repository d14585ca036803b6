"""Scenario driven command line front end.

A scenario is an INI file::

    [weight]
    kind = p_laplacian
    p = 2
    alpha = 0

    [nonlinearity]
    f = linear

    [grid]
    n = 1
    y_extent = 3.141592653589793
    x_extent = 6
    ny = 64
    nx = 64

    [boundary]
    far_field = dirichlet
    profile = exp_cos

Every subcommand writes ``<subcommand>.json`` and a few
``<subcommand>_<quantity>.csv`` files into ``--out``.  Exit status is 0 when
every asserted inequality holds, 2 when one is violated and 1 on errors.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .geometry import decomposition_residuals, geometry_fields, identity_A3_residual
from .grid import Field, GridError, build_grid
from .nonlinearities import BOUNDARY_NAMES, INTERIOR_NAMES, boundary_reaction, interior_reaction
from .solver import (DirichletProfile, NeumannZero, NewtonOptions, Scenario, SingularJacobian,
                     boundary_flux_check, newton_solve)
from .stability import linearized_residual_check, relaxed_stability_scan, second_variation_fd_check
from .verify import (capacity_phi, capacity_scan, energy_growth_scan, poincare_sides,
                     regularity_integrals, symmetry_detect, symmetry_hypotheses, tatay_bound_check)
from .weights import (KINDS, WeightDivergenceError, WeightModel, assemble_B, check_ellipticity,
                      check_growth_bound, check_muckenhoupt, eval_a, eval_a_t,
                      validate_weight_params)

log = logging.getLogger(__name__)

SUBCOMMANDS = ("check-weight", "solve", "stability", "poincare", "capacity", "energy-scan",
               "symmetry", "identity-check", "all")
ALL_ORDER = ("check-weight", "solve", "stability", "poincare", "energy-scan", "symmetry",
             "identity-check")

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


def _profile_diagonal(*c):
    if len(c) == 3:
        return np.tanh((c[0] + c[1]) / math.sqrt(2.0)) + 0.0 * c[-1]
    return np.tanh(c[0]) + 0.0 * c[-1]


#: named fields ``func(y1, ..., yn, x)`` usable as boundary data or initial guesses
PROFILES = {
    "zero": lambda *c: 0.0 * c[-1],
    "one": lambda *c: 1.0 + 0.0 * c[-1],
    "exp_cos": lambda *c: np.exp(-c[-1]) * np.cos(c[0]),
    "tanh_y1": lambda *c: np.tanh(c[0]) + 0.0 * c[-1],
    "tanh_diagonal": _profile_diagonal,
    "radial": lambda *c: sum(y * y for y in c[:-1]) + 0.0 * c[-1],
    "saddle": lambda *c: c[0] ** 2 - (c[1] ** 2 if len(c) == 3 else 0.0) + 0.0 * c[-1],
}


# -- configuration ------------------------------------------------------------------


def _floats(text):
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA = {
    "weight": {"kind": str, "p": float, "alpha": float, "grad_floor": float,
               "t_table": _floats, "a_table": _floats},
    "nonlinearity": {"f": str, "f_k": float, "f_c": float, "f_q": float,
                     "g": str, "g_c": float, "g_q": float, "g_decay": float},
    "grid": {"n": int, "y_extent": float, "x_extent": float, "ny": int, "nx": int},
    "newton": {"max_iter": int, "tol": float, "damping": float, "min_step": float,
               "linear_solver": str},
    "verify": {"radii": _floats, "energy_radii": _floats, "basis_sizes": _ints, "fd_eps": float,
               "tol_stab": float, "tol_poin": float, "tol_sym": float, "tol_fit": float,
               "tol_identity": float, "tol_fd": float, "muckenhoupt_t": _floats,
               "muckenhoupt_d": _floats, "growth_t_max": float, "samples": int},
    "boundary": {"far_field": str, "profile": str, "faces": str},
    "initial": {"field": str, "scale": float, "perturbation": float, "solve": _bool,
                "embed_1d": _bool},
}
REQUIRED = (("weight", "kind"), ("nonlinearity", "f"))
GRID_KEYS = ("n", "y_extent", "x_extent", "ny", "nx")

TOLERANCE_DEFAULTS = {"tol_stab": 1e-6, "tol_poin": 1e-6, "tol_sym": 1e-3, "tol_fit": 0.1,
                      "tol_identity": 0.05, "tol_fd": 1e-4}


class ConfigError(ValueError):
    """All problems found in a scenario file."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    grid: dict
    radii: list
    energy_radii: list
    basis_sizes: list
    fd_eps: float
    tolerances: dict
    muckenhoupt_t: list
    muckenhoupt_d: list
    growth_t_max: float
    samples: int
    initial: dict
    boundary: dict
    out_dir: str = "out"
    seed: int = 0
    config_path: str = None


def _read_sections(text, overrides=()):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"unreadable config: {exc}"]) from exc
    raw = {sec: {k: v.strip().strip('"').strip("'") for k, v in cp.items(sec)} for sec in cp.sections()}
    errors = []
    for item in overrides:
        key, sep, val = item.partition("=")
        sec, dot, name = key.strip().rpartition(".")
        if not sep:
            errors.append(f"override {item!r} is not KEY=VALUE")
            continue
        raw.setdefault(sec if dot else "verify", {})[name] = val.strip()
    return raw, errors


def parse_config(text, overrides=(), base_dir=None):
    """Validate a scenario file; returns ``(RunConfig, Scenario)`` or raises :class:`ConfigError`.

    ``overrides`` are ``KEY=VALUE`` strings applied before validation; a bare
    key refers to the ``[verify]`` section.
    """
    raw, errors = _read_sections(text, overrides)
    vals = {}
    for sec, items in raw.items():
        if sec not in SCHEMA:
            errors.append(f"unknown section [{sec}]")
            continue
        for key, text_val in items.items():
            conv = SCHEMA[sec].get(key)
            if conv is None:
                errors.append(f"unknown key {sec}.{key}")
                continue
            try:
                vals[(sec, key)] = conv(text_val)
            except ValueError:
                errors.append(f"{sec}.{key}: cannot parse {text_val!r}")
    for req in REQUIRED:
        if req not in vals and f"{req[0]}.{req[1]}: cannot parse" not in " ".join(errors):
            errors.append(f"missing required key {req[0]}.{req[1]}")

    def get(sec, key, default=None):
        return vals.get((sec, key), default)

    # initial field may be a dump that carries its own grid
    init_field = get("initial", "field")
    dump_path = None
    if init_field is not None and init_field not in PROFILES:
        dump_path = init_field if os.path.isabs(init_field) or base_dir is None else os.path.join(base_dir, init_field)
        if not os.path.exists(dump_path):
            errors.append(f"initial.field: {init_field!r} is neither a profile name nor a file")
    if dump_path is None:
        for key in GRID_KEYS:
            if ("grid", key) not in vals:
                errors.append(f"missing required key grid.{key}")

    kind = get("weight", "kind", "p_laplacian")
    p = get("weight", "p", 2.0 if kind == "p_laplacian" else float("nan"))
    alpha = get("weight", "alpha", 0.0)
    grad_floor = get("weight", "grad_floor", 1e-10)
    t_table, a_table = get("weight", "t_table", []), get("weight", "a_table", [])
    if ("weight", "kind") in vals:
        errors.extend(validate_weight_params(kind, p, alpha, grad_floor, t_table, a_table))

    fname, gname = get("nonlinearity", "f"), get("nonlinearity", "g", "zero")
    if fname is not None and fname not in BOUNDARY_NAMES:
        errors.append(f"nonlinearity.f must be one of {BOUNDARY_NAMES}, got {fname!r}")
    if gname not in INTERIOR_NAMES:
        errors.append(f"nonlinearity.g must be one of {INTERIOR_NAMES}, got {gname!r}")

    grid = {k: get("grid", k) for k in GRID_KEYS}
    if dump_path is None and all(v is not None for v in grid.values()):
        if grid["n"] not in (1, 2):
            errors.append("grid.n must be 1 or 2")
        if not (grid["y_extent"] > 0 and grid["x_extent"] > 0):
            errors.append("grid extents must be positive")
        if grid["ny"] < 4 or grid["nx"] < 4:
            errors.append("grid needs at least 4 cells per axis")

    tolerances = {k: get("verify", k, v) for k, v in TOLERANCE_DEFAULTS.items()}
    for k, v in tolerances.items():
        if not v > 0:
            errors.append(f"verify.{k} must be positive")
    newton_kw = {k: get("newton", k) for k in SCHEMA["newton"] if ("newton", k) in vals}
    for k in ("tol", "damping", "min_step"):
        if k in newton_kw and not newton_kw[k] > 0:
            errors.append(f"newton.{k} must be positive")
    if newton_kw.get("linear_solver", "auto") not in ("auto", "direct", "iterative"):
        errors.append("newton.linear_solver must be auto, direct or iterative")

    radii_lists = {k: get("verify", k) for k in ("radii", "energy_radii")}
    for k, r in radii_lists.items():
        if r is not None and (not r or r[0] <= 0 or any(b <= a for a, b in zip(r, r[1:]))):
            errors.append(f"verify.{k} must be positive and strictly increasing")
    if radii_lists["energy_radii"] is not None and len(radii_lists["energy_radii"]) < 3:
        errors.append("verify.energy_radii needs at least 3 radii")
    basis_sizes = get("verify", "basis_sizes", [4, 6, 8])
    if not basis_sizes or min(basis_sizes) < 1:
        errors.append("verify.basis_sizes must be positive integers")

    far = get("boundary", "far_field", "neumann")
    profile = get("boundary", "profile")
    if far not in ("neumann", "dirichlet"):
        errors.append("boundary.far_field must be neumann or dirichlet")
    if far == "dirichlet" and profile not in PROFILES:
        errors.append(f"boundary.profile must be one of {sorted(PROFILES)}")
    faces = get("boundary", "faces", "all")
    faces = faces if faces in ("all", "lateral", "top", "none") else [f.strip() for f in faces.split(",")]

    if errors:
        raise ConfigError(errors)

    model = WeightModel(kind, p, alpha, grad_floor, tuple(t_table), tuple(a_table))
    f_params = {k[2:]: get("nonlinearity", k) for k in ("f_k", "f_c", "f_q") if ("nonlinearity", k) in vals}
    g_params = {k[2:]: get("nonlinearity", k) for k in ("g_c", "g_q", "g_decay") if ("nonlinearity", k) in vals}
    try:
        f = boundary_reaction(fname, **f_params)
        g = interior_reaction(gname, **g_params)
    except (KeyError, ValueError) as exc:
        raise ConfigError([str(exc)]) from exc
    bc = DirichletProfile(PROFILES[profile], faces) if far == "dirichlet" else NeumannZero()
    scenario = Scenario(model, f, g, bc, NewtonOptions(**newton_kw))

    run = RunConfig(
        grid=grid, radii=radii_lists["radii"], energy_radii=radii_lists["energy_radii"],
        basis_sizes=basis_sizes, fd_eps=get("verify", "fd_eps", 1e-2), tolerances=tolerances,
        muckenhoupt_t=get("verify", "muckenhoupt_t", [0.5, 1.0, 2.0]),
        muckenhoupt_d=get("verify", "muckenhoupt_d", [1.0, 2.0]),
        growth_t_max=get("verify", "growth_t_max", 10.0), samples=get("verify", "samples", 1000),
        initial={"field": init_field or (profile if far == "dirichlet" else "zero"),
                 "dump": dump_path, "scale": get("initial", "scale", 1.0),
                 "perturbation": get("initial", "perturbation", 0.0),
                 "solve": get("initial", "solve", True), "embed_1d": get("initial", "embed_1d", False)},
        boundary={"far_field": far, "profile": profile, "faces": faces})
    return run, scenario


# -- serialisation ----------------------------------------------------------------------


def _json_value(v):
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_json_value(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _Float(float(v))
    return v


class _Float(float):
    pass


def dumps_json(obj):
    """Deterministic JSON: sorted keys, floats with 17 significant digits, NaN as null."""
    def enc(v, indent):
        pad = "  " * (indent + 1)
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v[k], indent + 1)}" for k in sorted(v)]
            return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
        if isinstance(v, list):
            if not v:
                return "[]"
            if any(isinstance(x, dict) for x in v):
                return "[\n" + ",\n".join(pad + enc(x, indent + 1) for x in v) + "\n" + "  " * indent + "]"
            return "[" + ", ".join(enc(x, indent + 1) for x in v) + "]"
        if isinstance(v, _Float):
            return format(v, ".17g") if math.isfinite(v) else "null"
        return json.dumps(v)
    return enc(_json_value(obj), 0) + "\n"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating, int, np.integer))
                        and not isinstance(v, bool) else v for v in row])


# -- pipeline ---------------------------------------------------------------------------


@dataclass
class Outcome:
    report: dict
    violations: list = field(default_factory=list)
    csvs: dict = field(default_factory=dict)


def _default_radii(extent, count_min=1):
    radii = [math.exp(k) for k in range(1, 12) if math.exp(k) <= extent]
    return radii or [math.e][:count_min]


class Pipeline:
    """Lazily builds the grid, the field under study and its geometry, shared across subcommands."""

    def __init__(self, run, scenario):
        self.run = run
        self.s = scenario
        self.solve_report = None

    @cached_property
    def grid(self):
        if self.run.initial["dump"]:
            return self.loaded.grid
        g = self.run.grid
        return build_grid(g["n"], g["y_extent"], g["x_extent"], g["ny"], g["nx"], self.s.weight.alpha)

    @cached_property
    def loaded(self):
        return Field.load(self.run.initial["dump"])

    @property
    def extent(self):
        return min(self.grid.y_extent, self.grid.x_extent)

    def _initial(self, grid, s):
        ini = self.run.initial
        if ini["dump"]:
            return self.loaded.copy()
        base = Field.from_function(grid, PROFILES[ini["field"]])
        vals = ini["scale"] * base.values
        if ini["perturbation"]:
            c = grid.coords()
            Y = grid.y_extent
            vals = vals + ini["perturbation"] * np.broadcast_to(
                np.cos(0.5 * np.pi * c[0] / Y) * np.sin(np.pi * c[grid.n - 1] / Y) * np.exp(-c[-1]), grid.shape)
        return Field(grid, vals)

    def _embedded_start(self):
        """Solve the problem with one lateral variable and extend it constantly in ``y2``."""
        g = self.grid
        g1 = build_grid(1, g.y_extent, g.x_extent, g.ny, g.nx, g.alpha)
        s1 = self.s
        bc = self.s.far_field_bc
        if isinstance(bc, DirichletProfile):
            faces = bc.faces if isinstance(bc.faces, str) else [f for f in bc.faces if f != "y2"]
            prof = bc.profile
            s1 = replace(self.s, far_field_bc=DirichletProfile(
                lambda y, x: prof(y, np.zeros_like(y), x), faces))
        ini = self.run.initial
        u1, rep = newton_solve(s1, Field.from_function(
            g1, lambda y, x: ini["scale"] * PROFILES[ini["field"]](y, np.zeros_like(y), x)))
        log.info("one-dimensional start: %d iterations, converged=%s", rep.iterations, rep.converged)
        return Field(g, np.broadcast_to(u1.values[:, None, :], g.shape).copy())

    @cached_property
    def u(self):
        ini = self.run.initial
        if not ini["solve"]:
            u = self._initial(self.grid, self.s)
            self.solve_report = None
            return u
        if ini["embed_1d"] and self.grid.n == 2 and not ini["dump"]:
            start = self._embedded_start()
        else:
            start = self._initial(self.grid, self.s)
        u, self.solve_report = newton_solve(self.s, start)
        return u

    @cached_property
    def fields(self):
        return geometry_fields(self.u)

    @cached_property
    def stability(self):
        return [relaxed_stability_scan(self.u, self.s, b, tol_rel=self.run.tolerances["tol_stab"])
                for b in self.run.basis_sizes]

    def radii(self):
        return self.run.radii or _default_radii(self.extent)

    def energy_radii(self):
        if self.run.energy_radii:
            return self.run.energy_radii
        L = self.extent
        return list(np.geomspace(min(1.0, 0.25 * L), L, 4))

    def cutoffs(self):
        r = self.grid.radius()
        L = self.extent
        out = {f"capacity_R{R:.6g}": capacity_phi(R, self.grid) for R in self.radii() if R >= math.e}
        out["bump"] = Field(self.grid, np.clip(1.0 - (r / (0.5 * L)) ** 2, 0.0, None))
        out["tent"] = Field(self.grid, np.clip(1.0 - r / L, 0.0, None))
        return out

    # -- subcommands ---------------------------------------------------------------------

    def check_weight(self):
        w = self.s.weight
        run = self.run
        rng = np.random.default_rng(run.seed)
        viol = []
        growth = check_growth_bound(w, run.growth_t_max)
        muck = []
        for t in run.muckenhoupt_t:
            for d in run.muckenhoupt_d:
                try:
                    muck.append({"t": t, "d": d, "value": check_muckenhoupt(w, t, d)})
                except WeightDivergenceError as exc:
                    muck.append({"t": t, "d": d, "value": float("nan")})
                    viol.append(str(exc))
        n = self.run.grid["n"] or self.grid.n
        x = rng.uniform(1e-3, 10.0, run.samples)
        grad = rng.normal(size=(run.samples, n + 1)) * rng.uniform(0.01, 10.0, (run.samples, 1))
        ell = check_ellipticity(w, x, grad)
        eig_dev = 0.0
        for xi, eta in zip(x[:200], grad[:200]):
            B = assemble_B(w, xi, eta)
            t = np.linalg.norm(eta)
            a, at = float(eval_a(w, xi, t)), float(eval_a_t(w, xi, t))
            expect = np.sort([a] * n + [a + at * t])
            eig_dev = max(eig_dev, float(np.max(np.abs(np.linalg.eigvalsh(B) - expect))) / max(abs(a), 1e-300))
        if ell.h1.min() < 0 or ell.h2_lambda.min() < 0:
            viol.append("ellipticity values become negative")
        values = [m["value"] for m in muck if math.isfinite(m["value"])]
        report = {"kind": w.kind, "p": w.p, "alpha": w.alpha, "grad_floor": w.grad_floor,
                  "growth_constant": growth, "growth_t_max": run.growth_t_max,
                  "muckenhoupt": muck, "muckenhoupt_constant": max(values) if values else float("nan"),
                  "muckenhoupt_expected": 1.0 / (1.0 - w.alpha ** 2) if -1 < w.alpha < 1 else float("nan"),
                  "min_h1": float(ell.h1.min()), "min_h2_lambda": float(ell.h2_lambda.min()),
                  "B_eigenvalue_relative_deviation": eig_dev, "samples": run.samples}
        rows = [(m["t"], m["d"], m["value"]) for m in muck]
        return Outcome(report, viol, {"muckenhoupt": (["t", "d", "ratio"], rows)})

    def solve(self):
        u = self.u
        rep = self.solve_report
        report = {"grid": self._grid_info()}
        viol = []
        if rep is None:
            report["solved"] = False
        else:
            report.update({"solved": True, "iterations": rep.iterations,
                           "final_residual_norm": rep.final_residual_norm, "converged": rep.converged,
                           "energy_integral": rep.energy_integral, "residual_history": rep.residual_history,
                           "smallest_pivot": rep.smallest_pivot, "flags": rep.flags})
            if not rep.converged:
                viol.append("Newton iteration did not converge")
        report["flux_defect"] = boundary_flux_check(u, self.s)
        if self.run.boundary["far_field"] == "dirichlet":
            ref = Field.from_function(u.grid, PROFILES[self.run.boundary["profile"]]).values
            report["max_deviation_from_profile"] = float(np.max(np.abs(u.values - ref)))
        csvs = {"boundary": ([f"y{j + 1}" for j in range(u.grid.n)] + ["u"], self._boundary_rows(u))}
        if rep is not None:
            csvs["residual"] = (["iteration", "residual_norm"], list(enumerate(rep.residual_history)))
        return Outcome(report, viol, csvs)

    def stability_cmd(self):
        scans = self.stability
        tol = self.run.tolerances
        rng = np.random.default_rng(self.run.seed)
        xi = self._random_direction(rng)
        eps = [self.run.fd_eps / 2 ** k for k in range(3)]
        mism = [second_variation_fd_check(self.u, xi, self.s, e) for e in eps]
        ratios = [a / b if b > 0 else float("nan") for a, b in zip(mism, mism[1:])]
        phi = self.cutoffs()["bump"]
        lin = linearized_residual_check(self.u, self.s, phi)
        last = scans[-1]
        stable = all(r.stable for r in scans)
        report = dict(last.as_dict(), stable=stable, basis_sizes=self.run.basis_sizes,
                      min_rayleigh_by_basis=[r.min_rayleigh for r in scans],
                      fd_eps=eps, fd_mismatch=mism, fd_ratios=ratios, linearized_residual=lin)
        viol = []
        if min(mism) > tol["tol_fd"]:
            viol.append(f"second variation mismatch {min(mism):.3e} exceeds {tol['tol_fd']:.1e}")
        rows = [(b, r.min_rayleigh, r.tol_stab) for b, r in zip(self.run.basis_sizes, scans)]
        return Outcome(report, viol, {"rayleigh": (["basis_size", "min_rayleigh", "tol_stab"], rows)})

    def poincare(self):
        tol = self.run.tolerances["tol_poin"]
        sides = {}
        viol = []
        for name, phi in self.cutoffs().items():
            rep = poincare_sides(self.u, phi, self.s, self.fields, tol_rel=tol)
            sides[name] = rep.as_dict()
            if not rep.holds:
                viol.append(f"{name}: margin {rep.margin:.6g} below -{rep.tol_poin:.3g}")
        radii, ratios, cap_viol = self._capacity()
        viol += cap_viol
        report = {"cutoffs": sides, "capacity_radii": radii, "capacity_ratios": ratios,
                  "capacity_floor": min(ratios) if ratios else float("nan"),
                  "stable": all(r.stable for r in self.stability),
                  "regularity": regularity_integrals(self.u, self.s, self.radii(), self.fields)}
        rows = [(k, v["lhs"], v["rhs"], v["margin"]) for k, v in sides.items()]
        return Outcome(report, viol, {"sides": (["cutoff", "lhs", "rhs", "margin"], rows),
                                      "capacity": (["R", "ratio"], list(zip(radii, ratios)))})

    def _capacity(self):
        """Capacity ratios and a violation for every increase along the radii."""
        radii = [R for R in self.radii() if R >= math.e]
        ratios = capacity_scan(self.u, self.s, radii, self.fields) if radii else []
        slack = self.run.tolerances["tol_poin"] * max(ratios, default=0.0)
        viol = [f"capacity ratio increases from R={radii[k]:.6g} to R={radii[k + 1]:.6g}"
                for k in range(len(ratios) - 1) if ratios[k + 1] > ratios[k] + slack]
        return radii, ratios, viol

    def capacity(self):
        radii, ratios, viol = self._capacity()
        report = {"radii": radii, "ratios": ratios, "floor": min(ratios) if ratios else float("nan"),
                  "nonincreasing": not viol}
        return Outcome(report, viol, {"ratio": (["R", "ratio"], list(zip(radii, ratios)))})

    def energy_scan(self):
        radii = self.energy_radii()
        rep = energy_growth_scan(self.u, self.s, radii)
        tol = self.run.tolerances["tol_fit"]
        viol = []
        if "degenerate" not in rep.flags and rep.fitted_exponent > 2.0 + tol:
            viol.append(f"energy grows like R^{rep.fitted_exponent:.4g}")
        if abs(rep.weight_exponent - rep.expected_weight_exponent) > 0.1:
            viol.append("weight volume exponent off by more than 0.1")
        grad = self.fields.grad
        t = np.sqrt(np.sum(grad * grad, axis=-1))
        h = Field(self.grid, self.s.weight.A(t) * t * t)
        annulus = []
        for R in radii:
            if R > 1:
                lhs, rhs = tatay_bound_check(h, R)
                annulus.append({"R": R, "lhs": lhs, "rhs": rhs})
                if lhs > rhs * (1 + 1e-12):
                    viol.append(f"annulus bound fails at R={R:.6g}")
        report = dict(rep.as_dict(), annulus_bound=annulus)
        rows = [(R, e, v) for R, e, v in zip(rep.radii, rep.energies, rep.weight_volumes)]
        return Outcome(report, viol, {"energy": (["R", "energy", "weight_volume"], rows)})

    def symmetry(self):
        rep = symmetry_detect(self.u, tol_sym=self.run.tolerances["tol_sym"])
        hyp = symmetry_hypotheses(self.s, self.fields)
        viol = [] if rep.is_one_dimensional else [
            f"angular deviation {rep.max_angular_deviation:.6g} exceeds {rep.tol_sym:.3g}"]
        x = self.grid.x_nodes
        rows = [(xi, *om, dv) for xi, om, dv in zip(x, rep.omega, rep.slice_deviation)]
        header = ["x"] + [f"omega{j + 1}" for j in range(self.grid.n)] + ["deviation"]
        return Outcome(dict(rep.as_dict(), hypotheses=hyp), viol, {"omega": (header, rows)})

    def identity_check(self):
        gf = self.fields
        res = identity_A3_residual(self.u, fields=gf)
        r1, r2 = decomposition_residuals(self.u, fields=gf)
        scale = gf.second_derivative_scale()
        hstar_min = float(np.nanmin(gf.hstar)) if gf.valid_mask.any() else 0.0
        viol = []
        if hstar_min < -1e-10 * scale ** 2:
            viol.append(f"H_* reaches {hstar_min:.3e}")
        if res.value > self.run.tolerances["tol_identity"] * scale ** 2:
            viol.append(f"A3 residual {res.value:.3e} exceeds tolerance")
        report = {"a3_residual": res.value, "a3_relative": res.value / scale ** 2 if scale > 0 else 0.0,
                  "split_residual": r1, "tangential_residual": r2, "hstar_min": hstar_min,
                  "second_derivative_scale": scale, "nodes": res.nodes, "skipped_nodes": res.skipped}
        a3 = gf.h1 + gf.hstar + gf.total_curvature ** 2 * gf.gamma ** 2 + gf.tangential_grad_norm ** 2
        per_slice = np.abs(np.where(gf.valid_mask, a3, 0.0)).reshape(-1, self.grid.nx + 1).max(axis=0)
        rows = list(zip(self.grid.x_nodes, per_slice))
        return Outcome(report, viol, {"residual": (["x", "a3_residual"], rows)})

    # -- helpers ----------------------------------------------------------------------------

    def _grid_info(self):
        g = self.grid
        return {"n": g.n, "y_extent": g.y_extent, "x_extent": g.x_extent, "ny": g.ny, "nx": g.nx,
                "alpha": g.alpha, "gamma": g.gamma}

    def _boundary_rows(self, u):
        g = u.grid
        coords = np.meshgrid(*([g.y_nodes] * g.n), indexing="ij")
        return list(zip(*(c.ravel() for c in coords), u.values[..., 0].ravel()))

    def _random_direction(self, rng):
        """Smooth random direction vanishing on the far-field faces."""
        g = self.grid
        c = g.coords()
        vals = np.zeros(g.shape)
        for _ in range(3):
            term = rng.normal() * np.ones(g.shape)
            for j, k in enumerate(rng.integers(1, 4, size=g.n)):
                term = term * np.sin(0.5 * np.pi * k * (c[j] + g.y_extent) / g.y_extent)
            vals += term
        vals *= np.broadcast_to(1.0 - c[-1] / g.x_extent, g.shape)
        vals[g.face_mask("all")] = 0.0
        return Field(g, vals)


COMMANDS = {
    "check-weight": Pipeline.check_weight,
    "solve": Pipeline.solve,
    "stability": Pipeline.stability_cmd,
    "poincare": Pipeline.poincare,
    "capacity": Pipeline.capacity,
    "energy-scan": Pipeline.energy_scan,
    "symmetry": Pipeline.symmetry,
    "identity-check": Pipeline.identity_check,
}


def run(subcommand, run_cfg, scenario):
    """Execute ``subcommand`` and write its artifacts; returns the exit code."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    os.makedirs(run_cfg.out_dir, exist_ok=True)
    pipe = Pipeline(run_cfg, scenario)
    names = ALL_ORDER if subcommand == "all" else (subcommand,)
    code = EXIT_OK
    for name in names:
        out = COMMANDS[name](pipe)
        out.report["violations"] = out.violations
        out.report["passed"] = not out.violations
        out.report["seed"] = run_cfg.seed
        with open(os.path.join(run_cfg.out_dir, f"{name}.json"), "w") as fh:
            fh.write(dumps_json(out.report))
        for qty, (header, rows) in out.csvs.items():
            _write_csv(os.path.join(run_cfg.out_dir, f"{name}_{qty}.csv"), header, rows)
        if name == "solve":
            pipe.u.dump(os.path.join(run_cfg.out_dir, "solve_u.bin"))
        status = "ok" if not out.violations else "VIOLATION: " + "; ".join(out.violations)
        print(f"{name}: {status}")
        if out.violations:
            code = EXIT_VIOLATION
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="boundary-reaction", description=__doc__.split("\n\n")[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="scenario INI file")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--radii", help="comma separated radii for the Poincare and capacity scans")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol-override", action="append", default=[], metavar="KEY=V",
                    help="override a config value, e.g. tol_sym=1e-4 or newton.tol=1e-9")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.config) as fh:
            text = fh.read()
        overrides = list(args.tol_override)
        if args.radii:
            overrides.append(f"verify.radii={args.radii}")
        run_cfg, scenario = parse_config(text, overrides, base_dir=os.path.dirname(os.path.abspath(args.config)))
        run_cfg.out_dir = args.out
        run_cfg.seed = args.seed
        run_cfg.config_path = args.config
        return run(args.subcommand, run_cfg, scenario)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, GridError, SingularJacobian, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
