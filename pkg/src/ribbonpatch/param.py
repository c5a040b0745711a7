"""Harmonic reparameterization of each side and its boundary normal derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from . import mesh as _mesh
from ._linalg import SPDSolver
from .mesh import TriMesh

S_EXTENSIONS = ("clamp-linear", "nearest")
GRADIENT_METHODS = ("area", "one-sided")


@dataclass(frozen=True)
class SideParam:
    """Harmonic fields ``(s, h)`` of one side and their inward normal derivatives.

    ``vertices``, ``params``, ``dn_s`` and ``dn_h`` run along the side (both
    corners included), matching the side's slots.
    """

    side_index: int
    vertices: np.ndarray
    params: np.ndarray
    s_field: np.ndarray
    h_field: np.ndarray
    dn_s: np.ndarray
    dn_h: np.ndarray


class HarmonicSolver:
    """Dirichlet problems for the cotangent Laplacian sharing one factorization."""

    def __init__(self, mesh: TriMesh, L=None, method: str = "direct"):
        self.mesh = mesh
        L = _mesh.cotangent_weights(mesh) if L is None else L
        self.interior = mesh.interior_vertices
        self.boundary = mesh.boundary_vertices
        L = L.tocsr()
        self._L_ib = L[self.interior][:, self.boundary]
        self._solver = SPDSolver(L[self.interior][:, self.interior], method=method)

    def solve(self, boundary_values) -> np.ndarray:
        """Field with the given values on ``mesh.boundary_vertices`` (a vector or columns)."""
        g = np.asarray(boundary_values, dtype=float)
        out = np.empty((self.mesh.n_vertices,) + g.shape[1:])
        out[self.boundary] = g
        if len(self.interior):
            out[self.interior] = self._solver.solve(-(self._L_ib @ g))
        return out


def _boundary_vector(mesh: TriMesh, dirichlet: Union[Mapping[int, float], np.ndarray]) -> np.ndarray:
    bv = mesh.boundary_vertices
    if isinstance(dirichlet, Mapping):
        missing = [int(v) for v in bv if int(v) not in dirichlet]
        if missing:
            raise ValueError(f"no Dirichlet value for boundary vertices {missing[:10]}")
        return np.array([dirichlet[int(v)] for v in bv], dtype=float)
    g = np.asarray(dirichlet, dtype=float)
    if g.shape != (len(bv),):
        raise ValueError(f"expected {len(bv)} boundary values")
    return g


def harmonic_field(mesh: TriMesh, dirichlet) -> np.ndarray:
    """Discrete harmonic extension of boundary data.

    ``dirichlet`` maps every boundary vertex to its value, either as a dict
    or as an array aligned with ``mesh.boundary_vertices``.
    """
    return HarmonicSolver(mesh).solve(_boundary_vector(mesh, dirichlet))


def _path_values(mesh, verts, start, stop):
    p = mesh.vertices[verts]
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])
    return start + (stop - start) * cum / cum[-1]


def s_dirichlet(mesh: TriMesh, side: int, mode: str = "clamp-linear") -> np.ndarray:
    """Boundary data for ``s``, aligned with ``mesh.boundary_vertices``.

    ``clamp-linear``: arc length on the side, 0 on the previous side, 1 on
    the next one, and a linear ramp from 1 back to 0 over the rest of the
    loop; 0.5 on other loops. ``nearest``: every boundary vertex copies the
    parameter of the nearest vertex of the side.
    """
    sides = _mesh.require_sides(mesh)
    bv = mesh.boundary_vertices
    own_v = np.asarray(sides.vertices[side])
    own_t = np.asarray(sides.params[side])
    val: dict[int, float] = {}
    if mode == "nearest":
        d = np.linalg.norm(mesh.vertices[bv][:, None, :] - mesh.vertices[own_v][None, :, :], axis=2)
        nearest = own_t[np.argmin(d, axis=1)]
        val.update(zip(bv.tolist(), nearest.tolist()))
    elif mode == "clamp-linear":
        val.update({int(v): 0.5 for v in bv})
        loop = next(ls for ls in sides.loop_sides if side in ls)
        i = loop.index(side)
        order = [loop[(i + k) % len(loop)] for k in range(1, len(loop))]
        if len(order) == 1:
            rest = np.asarray(sides.vertices[order[0]])
            val.update(zip(rest.tolist(), _path_values(mesh, rest, 1.0, 0.0).tolist()))
        else:
            prev, nxt, middle = order[-1], order[0], order[1:-1]
            val.update({int(v): 0.0 for v in sides.vertices[prev]})
            val.update({int(v): 1.0 for v in sides.vertices[nxt]})
            if middle:
                path = np.concatenate([np.asarray(sides.vertices[k])[(0 if j == 0 else 1):] for j, k in enumerate(middle)])
                val.update(zip(path.tolist(), _path_values(mesh, path, 1.0, 0.0).tolist()))
    else:
        raise ValueError(f"unknown s-extension {mode!r}; expected one of {S_EXTENSIONS}")
    val.update(zip(own_v.tolist(), own_t.tolist()))
    return np.array([val[int(v)] for v in bv])


def h_dirichlet(mesh: TriMesh, side: int) -> np.ndarray:
    sides = _mesh.require_sides(mesh)
    on_side = np.isin(mesh.boundary_vertices, sides.vertices[side])
    return np.where(on_side, 0.0, 1.0)


def _one_sided_gradients(mesh: TriMesh, verts, fields) -> np.ndarray:
    """Gradients at side vertices from the triangles carrying the side's edges."""
    edges = set()
    for a, b in zip(verts[:-1], verts[1:]):
        edges.add((int(a), int(b)))
    t = mesh.triangles
    owner = {}
    for f, (a, b, c) in enumerate(t.tolist()):
        for e in ((a, b), (b, c), (c, a)):
            if e in edges:
                owner[e] = f
    area = mesh.triangle_areas()
    out = np.zeros((len(fields), len(verts), 2))
    grads = [_mesh.face_gradients(mesh, f) for f in fields]
    for k, v in enumerate(verts):
        fs = []
        if k > 0:
            fs.append(owner[(int(verts[k - 1]), int(v))])
        if k < len(verts) - 1:
            fs.append(owner[(int(v), int(verts[k + 1]))])
        w = area[fs]
        for m, g in enumerate(grads):
            out[m, k] = (w[:, None] * g[fs]).sum(axis=0) / w.sum()
    return out


def side_parameterization(
    mesh: TriMesh,
    side_index: int,
    *,
    s_extension: str = "clamp-linear",
    gradient: str = "area",
    solver: Optional[HarmonicSolver] = None,
) -> SideParam:
    """Harmonic ``(s, h)`` for one side plus ``ds/dn`` and ``dh/dn`` along it."""
    sides = _mesh.require_sides(mesh)
    if not 0 <= side_index < sides.n_sides:
        raise IndexError(f"side {side_index} out of range (mesh has {sides.n_sides} sides)")
    solver = solver or HarmonicSolver(mesh)
    g = np.column_stack([s_dirichlet(mesh, side_index, s_extension), h_dirichlet(mesh, side_index)])
    fields = solver.solve(g)
    s_field, h_field = fields[:, 0].copy(), fields[:, 1].copy()
    # boundary rows are substituted; pin them exactly
    verts = np.asarray(sides.vertices[side_index])
    params = np.asarray(sides.params[side_index])
    s_field[verts] = params
    h_field[verts] = 0.0

    off = sides.slot_offsets()
    normals = _mesh.slot_normals(mesh)[off[side_index] : off[side_index + 1]]
    if gradient == "area":
        gs = _mesh.vertex_gradients(mesh, s_field)[verts]
        gh = _mesh.vertex_gradients(mesh, h_field)[verts]
    elif gradient == "one-sided":
        gs, gh = _one_sided_gradients(mesh, verts, [s_field, h_field])
    else:
        raise ValueError(f"unknown gradient method {gradient!r}; expected one of {GRADIENT_METHODS}")
    for a in (s_field, h_field):
        a.setflags(write=False)
    return SideParam(
        side_index,
        verts,
        params,
        s_field,
        h_field,
        np.einsum("ij,ij->i", gs, normals),
        np.einsum("ij,ij->i", gh, normals),
    )


def all_side_parameterizations(mesh: TriMesh, **kwargs) -> list[SideParam]:
    solver = kwargs.pop("solver", None) or HarmonicSolver(mesh)
    sides = _mesh.require_sides(mesh)
    return [side_parameterization(mesh, k, solver=solver, **kwargs) for k in range(sides.n_sides)]


def normal_derivative(dn_s, dn_h, partials) -> np.ndarray:
    """Chain rule ``dR/dn = ds/dn * dR/ds + dh/dn * dR/dh``."""
    dR_ds, dR_dh = (np.asarray(p, dtype=float) for p in partials)
    a = np.asarray(dn_s, dtype=float)[..., None]
    b = np.asarray(dn_h, dtype=float)[..., None]
    return a * dR_ds + b * dR_dh
