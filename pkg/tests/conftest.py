import functools

import numpy as np
import pytest

from boundary_reaction import (DirichletProfile, Field, Scenario, WeightModel, boundary_reaction,
                               build_grid, newton_solve)


def exact_manufactured(y, x):
    return np.exp(-x) * np.cos(y)


def tanh_profile(*c):
    return np.tanh(c[0]) + 0.0 * c[-1]


def manufactured_scenario():
    return Scenario(WeightModel.p_laplacian(2.0), boundary_reaction("linear"),
                    far_field_bc=DirichletProfile(exact_manufactured, "all"))


@functools.lru_cache(maxsize=None)
def manufactured_solution(cells):
    grid = build_grid(1, np.pi, 6.0, cells, cells)
    s = manufactured_scenario()
    start = Field.from_function(grid, lambda y, x: 0.9 * exact_manufactured(y, x))
    return (*newton_solve(s, start), s)


def layer_scenario(p=2.0, alpha=0.0, faces=("y1",)):
    return Scenario(WeightModel.p_laplacian(p, alpha), boundary_reaction("cubic"),
                    far_field_bc=DirichletProfile(tanh_profile, list(faces)))


@functools.lru_cache(maxsize=None)
def layer_1d(p=2.0, alpha=0.0, extent=20.0, ny=64, nx=48):
    grid = build_grid(1, extent, extent, ny, nx, alpha)
    s = layer_scenario(p, alpha)
    u, rep = newton_solve(s, Field.from_function(grid, tanh_profile))
    return u, rep, s


@functools.lru_cache(maxsize=None)
def layer_2d(extent=60.0, ny=64, nx=48):
    """n = 2 layer; Newton is started from the n = 1 solution extended in ``y2``."""
    u1, _, s = layer_1d(2.0, 0.0, extent, ny, nx)
    grid = build_grid(2, extent, extent, ny, nx)
    start = Field(grid, np.broadcast_to(u1.values[:, None, :], grid.shape).copy())
    u, rep = newton_solve(s, start)
    return u, rep, s


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import CRITERIA

    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::" not in nodeid or getattr(rep, "when", "call") != "call" and outcome != "error":
                continue
            name = nodeid.split("::")[-1]
            key = name[: len("test_criterion_00")]
            if key in CRITERIA:
                lines.append((key, f"[{'PASS' if outcome == 'passed' else 'FAIL'}] {CRITERIA[key]}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
