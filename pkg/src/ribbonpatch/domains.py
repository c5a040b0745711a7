"""Structured triangulations of simple polygonal domains.

These are convenience generators for tests, demos and convergence studies;
general domains come in as precomputed OFF meshes.
"""

from __future__ import annotations

import numpy as np

from . import mesh as _mesh
from .mesh import TriMesh


class _VertexPool:
    def __init__(self, scale: float):
        self._key = 1e-9 * scale
        self.points: list = []
        self._index: dict = {}

    def add(self, p) -> int:
        key = (round(p[0] / self._key), round(p[1] / self._key))
        if key not in self._index:
            self._index[key] = len(self.points)
            self.points.append((float(p[0]), float(p[1])))
        return self._index[key]


def _orient(points, tris):
    p = np.asarray(points)
    t = np.asarray(tris, dtype=np.int64)
    a = p[t]
    cr = (a[:, 1, 0] - a[:, 0, 0]) * (a[:, 2, 1] - a[:, 0, 1]) - (a[:, 1, 1] - a[:, 0, 1]) * (a[:, 2, 0] - a[:, 0, 0])
    t[cr < 0] = t[cr < 0][:, [0, 2, 1]]
    return p, t


def regular_polygon(k: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = np.pi / 2) -> np.ndarray:
    ang = phase + 2 * np.pi * np.arange(k) / k
    return np.column_stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)])


def fan_mesh(polygon, n: int, center=None, sides: bool = True) -> TriMesh:
    """Split a star-shaped polygon into a fan and subdivide each triangle ``n`` times per edge.

    With ``sides`` the polygon corners become the side corners, side 0
    starting at ``polygon[0]``.
    """
    poly = np.asarray(polygon, dtype=float)
    c = poly.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    pool = _VertexPool(np.ptp(poly, axis=0).max())
    tris = []
    for k in range(len(poly)):
        a, b = poly[k], poly[(k + 1) % len(poly)]
        idx = {}
        for i in range(n + 1):
            for j in range(n + 1 - i):
                # i steps toward a, j toward b from the centre
                idx[i, j] = pool.add(c + (i * (a - c) + j * (b - c)) / n)
        for i in range(n):
            for j in range(n - i):
                tris.append((idx[i, j], idx[i + 1, j], idx[i, j + 1]))
                if i + j < n - 1:
                    tris.append((idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]))
    p, t = _orient(pool.points, tris)
    m = TriMesh.from_arrays(p, t)
    return m.with_sides(_mesh.sides_from_points(m, [poly])) if sides else m


def ring_mesh(outer, inner, n_tangential: int, n_radial: int, sides: bool = True) -> TriMesh:
    """Mesh of the region between two polygons with the same corner count.

    Corner ``k`` of ``outer`` is joined to corner ``k`` of ``inner``; each
    resulting quadrilateral is gridded ``n_tangential x n_radial``. The
    inner polygon bounds a hole.
    """
    outer = np.asarray(outer, dtype=float)
    inner = np.asarray(inner, dtype=float)
    if outer.shape != inner.shape:
        raise ValueError("outer and inner polygons need the same number of corners")
    pool = _VertexPool(np.ptp(outer, axis=0).max())
    tris = []
    k_n = len(outer)
    for k in range(k_n):
        o0, o1 = outer[k], outer[(k + 1) % k_n]
        i0, i1 = inner[k], inner[(k + 1) % k_n]
        idx = {}
        for a in range(n_tangential + 1):
            s = a / n_tangential
            po, pi = (1 - s) * o0 + s * o1, (1 - s) * i0 + s * i1
            for b in range(n_radial + 1):
                r = b / n_radial
                idx[a, b] = pool.add((1 - r) * po + r * pi)
        for a in range(n_tangential):
            for b in range(n_radial):
                q = idx[a, b], idx[a + 1, b], idx[a + 1, b + 1], idx[a, b + 1]
                if (a + b) % 2 == 0:
                    tris += [(q[0], q[1], q[2]), (q[0], q[2], q[3])]
                else:
                    tris += [(q[0], q[1], q[3]), (q[1], q[2], q[3])]
    p, t = _orient(pool.points, tris)
    m = TriMesh.from_arrays(p, t)
    # hole loops run clockwise, so list the inner corners in reverse
    return m.with_sides(_mesh.sides_from_points(m, [outer, inner[::-1]])) if sides else m


def grid_mesh(nx: int, ny: int, bounds=(0.0, 0.0, 1.0, 1.0), sides: bool = True) -> TriMesh:
    """Rectangle split into ``nx x ny`` cells, each cut along alternating diagonals."""
    x0, y0, x1, y1 = bounds
    xs, ys = np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    p = np.column_stack([X.ravel(), Y.ravel()])
    vid = np.arange(len(p)).reshape(nx + 1, ny + 1)
    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid[i, j], vid[i + 1, j], vid[i + 1, j + 1], vid[i, j + 1]
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    m = TriMesh.from_arrays(p, tris)
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    return m.with_sides(_mesh.sides_from_points(m, [corners])) if sides else m


def perturb_interior(mesh: TriMesh, amount: float, seed: int = 0) -> TriMesh:
    """Jitter interior vertices by up to ``amount`` times the shortest incident edge."""
    rng = np.random.default_rng(seed)
    v = np.array(mesh.vertices)
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    ell = np.linalg.norm(v[e[:, 0]] - v[e[:, 1]], axis=1)
    short = np.full(len(v), np.inf)
    np.minimum.at(short, e[:, 0], ell)
    np.minimum.at(short, e[:, 1], ell)
    inner = mesh.interior_vertices
    v[inner] += amount * short[inner, None] * rng.uniform(-1, 1, size=(len(inner), 2))
    m = TriMesh.from_arrays(v, t)
    return m.with_sides(mesh.sides) if mesh.sides is not None else m


def unit_square(n: int) -> TriMesh:
    """Fan mesh of ``[0, 1]^2`` with ``4 n^2`` right-isosceles triangles; side 0 is the bottom."""
    return fan_mesh([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], n)
