"""Ready-made domains and ribbon sets: a flat square, a five-sided vertex blend
and a five-sided patch with a pentagonal hole."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import domains
from .mesh import TriMesh
from .spline import Ribbon

DEMOS = ("flat-square", "vertex-blend", "multiply-connected")

# cubic Bernstein collocation at s = 0, 1/3, 2/3, 1
_S4 = np.linspace(0.0, 1.0, 4)
_B4 = np.array([[1, 3, 3, 1]]) * _S4[:, None] ** np.arange(4) * (1 - _S4[:, None]) ** (3 - np.arange(4))


def _bezier_through(samples) -> np.ndarray:
    """Cubic Bézier control points interpolating four equally spaced samples."""
    return np.linalg.solve(_B4, np.asarray(samples, dtype=float))


def surface_ribbon(a, b, lift: Callable, cross: Callable, width: float = 0.25) -> Ribbon:
    """Cubic-by-linear ribbon along the domain edge ``a -> b``.

    ``lift(p)`` gives the 3D boundary point over domain point ``p`` and
    ``cross(p, n)`` the cross-boundary derivative for unit inward normal
    ``n``. Both are reproduced exactly when they are cubic along the edge.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    t = b - a
    n = np.array([-t[1], t[0]]) / np.linalg.norm(t)
    pts = [a + s * t for s in _S4]
    row0 = _bezier_through([lift(p) for p in pts])
    row1 = row0 + width * _bezier_through([cross(p, n) for p in pts])
    return Ribbon.bezier(np.stack([row0, row1], axis=1))


def polygon_ribbons(loops: Sequence, lift, cross, width: float = 0.25) -> list[Ribbon]:
    """One ribbon per polygon edge, loops given in traversal order (holes clockwise)."""
    out = []
    for poly in loops:
        poly = np.asarray(poly, dtype=float)
        for k in range(len(poly)):
            out.append(surface_ribbon(poly[k], poly[(k + 1) % len(poly)], lift, cross, width))
    return out


def graph_lift(f, grad):
    """``lift`` / ``cross`` pair for the graph ``(x, y, f(x, y))``."""

    def lift(p):
        return np.array([p[0], p[1], f(p)])

    def cross(p, n):
        return np.array([n[0], n[1], float(np.dot(grad(p), n))])

    return lift, cross


def _blend_height(p):
    x, y = p
    return 0.3 * (x * x + y * y) + 0.25 * (y**3 - 3 * x * x * y)


def _blend_grad(p):
    x, y = p
    return np.array([0.6 * x - 1.5 * x * y, 0.6 * y + 0.75 * (y * y - x * x)])


def flat_square(n: int = 8):
    corners = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    mesh = domains.fan_mesh(corners, n)
    lift, cross = graph_lift(lambda p: 0.0, lambda p: np.zeros(2))
    return mesh, polygon_ribbons([corners], lift, cross), [corners]


def vertex_blend(n: int = 12):
    """Five-sided patch whose ribbons come from a cubic height field."""
    corners = domains.regular_polygon(5)
    mesh = domains.fan_mesh(corners, n)
    lift, cross = graph_lift(_blend_height, _blend_grad)
    return mesh, polygon_ribbons([corners], lift, cross, width=0.3), [corners]


def multiply_connected(n_tangential: int = 8, n_radial: int = 6):
    """Pentagonal ring; the hole ribbons are raised and flare downward into the domain."""
    outer = domains.regular_polygon(5, 1.0)
    inner = domains.regular_polygon(5, 0.4)
    mesh = domains.ring_mesh(outer, inner, n_tangential, n_radial)
    lift, cross = graph_lift(_blend_height, _blend_grad)
    ribbons = polygon_ribbons([outer], lift, cross, width=0.3)

    def hole_lift(p):
        return lift(p) + np.array([0.0, 0.0, 0.5])

    def hole_cross(p, n):
        return np.array([n[0], n[1], -0.9])

    hole = inner[::-1]
    ribbons += polygon_ribbons([hole], hole_lift, hole_cross, width=0.3)
    return mesh, ribbons, [outer, hole]


def make_demo(name: str, refinement: int = 0) -> tuple[TriMesh, list[Ribbon], list]:
    """``(mesh, ribbons, domain corner loops)`` for a named demo; ``refinement`` doubles the resolution."""
    f = 2**refinement
    if name == "flat-square":
        return flat_square(8 * f)
    if name == "vertex-blend":
        return vertex_blend(12 * f)
    if name == "multiply-connected":
        return multiply_connected(8 * f, 6 * f)
    raise KeyError(f"unknown demo {name!r}; choose from {DEMOS}")
