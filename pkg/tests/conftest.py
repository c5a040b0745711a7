"""Shared meshes for the test suite."""

import sys

import numpy as np
import pytest

from ribbonpatch import domains

NONCONVEX_PENTAGON = np.array([(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (1.0, 0.8), (0.0, 2.0)])
NONCONVEX_CENTER = (1.0, 0.3)


def square_annulus(n_tangential=4, n_radial=3):
    outer = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
    inner = [(-0.4, -0.4), (0.4, -0.4), (0.4, 0.4), (-0.4, 0.4)]
    return domains.ring_mesh(outer, inner, n_tangential, n_radial)


def obtuse_grid():
    return domains.perturb_interior(domains.grid_mesh(10, 8), 0.35, seed=3)


def small_meshes():
    """Named meshes with at most 200 vertices, covering obtuse, non-convex and two-loop cases."""
    return {
        "square-fan": domains.unit_square(5),
        "pentagon-fan": domains.fan_mesh(domains.regular_polygon(5), 6),
        "grid": domains.grid_mesh(8, 6, bounds=(0.0, 0.0, 2.0, 1.0)),
        "obtuse-grid": obtuse_grid(),
        "square-annulus": square_annulus(),
        "nonconvex-pentagon": domains.fan_mesh(NONCONVEX_PENTAGON, 5, center=NONCONVEX_CENTER),
        "triangle": domains.fan_mesh([(0.0, 0.0), (1.0, 0.0), (0.3, 0.9)], 6),
    }


@pytest.fixture(scope="session")
def meshes():
    return small_meshes()


@pytest.fixture(params=sorted(small_meshes()))
def mesh(request, meshes):
    return meshes[request.param]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.lines():
        terminalreporter.write_line(line)
