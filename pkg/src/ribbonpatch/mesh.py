"""Planar triangle meshes and the piecewise-linear FEM geometry built on them.

All matrices use the stiffness sign convention: the cotangent Laplacian has a
positive diagonal, non-positive off-diagonals on Delaunay meshes, and is
positive semidefinite.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

logger = logging.getLogger(__name__)


class MeshError(ValueError):
    """Base class for invalid mesh input."""


class NonManifoldEdgeError(MeshError):
    pass


class DegenerateTriangleError(MeshError):
    pass


class DisconnectedMeshError(MeshError):
    pass


class SideAssignmentError(MeshError):
    pass


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SideAssignment:
    """Split of the boundary loops into sides.

    ``vertices[k]`` lists the boundary vertices of side ``k`` in loop
    traversal order, both corners included; ``params[k]`` holds the
    normalized arc length of each of those vertices (0 at the start corner,
    1 at the end corner). ``loop_sides[l]`` lists the sides of boundary loop
    ``l`` in traversal order.

    A corner vertex appears in two sides. Each (side, vertex) pair is a
    *slot*; slots are numbered side by side in the order above.
    """

    vertices: tuple
    params: tuple
    loop_sides: tuple

    @property
    def n_sides(self) -> int:
        return len(self.vertices)

    @property
    def n_slots(self) -> int:
        return int(sum(len(v) for v in self.vertices))

    def slot_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([len(v) for v in self.vertices])])

    def slot_vertices(self) -> np.ndarray:
        return np.concatenate(self.vertices)

    def slot_sides(self) -> np.ndarray:
        return np.concatenate([np.full(len(v), k) for k, v in enumerate(self.vertices)])

    def slot_params(self) -> np.ndarray:
        return np.concatenate(self.params)

    def side_of_loop(self) -> np.ndarray:
        out = np.empty(self.n_sides, dtype=int)
        for l, sides in enumerate(self.loop_sides):
            out[list(sides)] = l
        return out

    def neighbours(self, side: int) -> tuple[int, int]:
        """Previous and next side along the loop containing ``side``."""
        for sides in self.loop_sides:
            if side in sides:
                i = list(sides).index(side)
                return sides[i - 1], sides[(i + 1) % len(sides)]
        raise SideAssignmentError(f"side {side} is not on any loop")

    def corners(self) -> list[tuple[int, int, int]]:
        """``(vertex, side_ending_here, side_starting_here)`` for every corner."""
        out = []
        for sides in self.loop_sides:
            for i, a in enumerate(sides):
                b = sides[(i + 1) % len(sides)]
                out.append((int(self.vertices[a][-1]), a, b))
        return out

    def to_triples(self) -> list[tuple[int, int, float]]:
        return [
            (int(v), k, float(t))
            for k, (vs, ts) in enumerate(zip(self.vertices, self.params))
            for v, t in zip(vs, ts)
        ]


@dataclass(frozen=True)
class TriMesh:
    """Indexed planar triangulation.

    Triangles are counter-clockwise. Boundary loops are oriented with the
    domain on their left, so the outer loop runs counter-clockwise and hole
    loops clockwise. The outer loop is always ``boundary_loops[0]``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loops: tuple
    sides: Optional[SideAssignment] = field(default=None, compare=False)

    @classmethod
    def from_arrays(cls, vertices, triangles, sides: Optional[SideAssignment] = None) -> "TriMesh":
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise MeshError("vertices must be an (n, 2) or (n, 3) array")
        if v.shape[1] == 3:
            if np.any(np.abs(v[:, 2]) > 0):
                raise MeshError("vertices must lie in the plane z = 0")
            v = v[:, :2]
        t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) == 0:
            raise MeshError("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            raise MeshError("triangle index out of range")

        area = _signed_areas(v, t)
        scale = max(np.ptp(v, axis=0).max(), 1e-300) ** 2
        bad = np.abs(area) <= 1e-14 * scale
        if np.any(bad):
            raise DegenerateTriangleError(f"zero-area triangles: {np.flatnonzero(bad)[:10].tolist()}")
        if np.all(area < 0):
            logger.warning("triangles are clockwise; flipping orientation")
            t = t[:, [0, 2, 1]]
        elif np.any(area < 0):
            raise MeshError(f"inconsistently oriented triangles: {np.flatnonzero(area < 0)[:10].tolist()}")

        used = np.zeros(len(v), dtype=bool)
        used[t.ravel()] = True
        if not used.all():
            raise DisconnectedMeshError(f"isolated vertices: {np.flatnonzero(~used)[:10].tolist()}")
        n_comp, _ = csgraph.connected_components(_adjacency(t, len(v)), directed=False)
        if n_comp != 1:
            raise DisconnectedMeshError(f"mesh has {n_comp} connected components")

        loops = _boundary_loops(v, t)
        return cls(_frozen(v, float), _frozen(t, np.int64), loops, sides)

    def with_sides(self, sides: SideAssignment) -> "TriMesh":
        validate_sides(self, sides)
        return replace(self, sides=sides)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def boundary_vertices(self) -> np.ndarray:
        """Boundary vertex indices, loop by loop in traversal order."""
        return np.concatenate(self.boundary_loops)

    @property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    def boundary_edges(self) -> np.ndarray:
        """Directed boundary edges ``(i, j)``, domain on the left."""
        return np.array([(lp[k], lp[(k + 1) % len(lp)]) for lp in self.boundary_loops for k in range(len(lp))])

    def triangle_areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    def angles(self) -> np.ndarray:
        """Interior angles (radians), ``angles[t, k]`` at corner ``k`` of triangle ``t``."""
        p = self.vertices[self.triangles]
        out = np.empty(self.triangles.shape)
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            out[:, k] = np.arctan2(np.abs(_cross(a, b)), np.einsum("ij,ij->i", a, b))
        return out

    def quality(self) -> dict:
        ang = np.degrees(self.angles())
        return {
            "n_vertices": int(self.n_vertices),
            "n_triangles": int(len(self.triangles)),
            "n_boundary_loops": len(self.boundary_loops),
            "min_angle_deg": float(ang.min()),
            "max_angle_deg": float(ang.max()),
            "n_obtuse": int(np.count_nonzero(ang.max(axis=1) > 90.0 + 1e-9)),
        }


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _signed_areas(v, t):
    p = v[t]
    return 0.5 * _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def _adjacency(t, n):
    i = t[:, [0, 1, 2]].ravel()
    j = t[:, [1, 2, 0]].ravel()
    return sparse.coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n)).tocsr()


def _boundary_loops(v, t) -> tuple:
    half = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    undirected = np.sort(half, axis=1)
    keys, counts = np.unique(undirected, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise NonManifoldEdgeError(f"edges with more than two faces: {keys[counts > 2][:10].tolist()}")
    _, dup = np.unique(half, axis=0, return_counts=True)
    if np.any(dup > 1):
        raise MeshError("adjacent triangles have opposite orientation")

    single = {tuple(e) for e in keys[counts == 1]}
    nxt: dict[int, int] = {}
    for a, b in half:
        if (min(a, b), max(a, b)) in single:
            if a in nxt:
                raise MeshError(f"non-manifold boundary vertex {a}")
            nxt[int(a)] = int(b)

    loops = []
    seen: set[int] = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        lp = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            if cur in seen:
                raise MeshError(f"non-manifold boundary vertex {cur}")
            lp.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(np.array(lp, dtype=np.int64))
    if not loops:
        raise MeshError("mesh has no boundary")

    areas = [0.5 * np.sum(_cross(v[lp], v[np.roll(lp, -1)])) for lp in loops]
    outer = int(np.argmax(areas))
    if areas[outer] <= 0:
        raise MeshError("no counter-clockwise outer boundary loop")
    order = [outer] + [i for i in range(len(loops)) if i != outer]
    for lp in loops:
        lp.setflags(write=False)
    return tuple(loops[i] for i in order)


def loop_signed_area(mesh: TriMesh, loop: int) -> float:
    lp = mesh.boundary_loops[loop]
    p = mesh.vertices[lp]
    return 0.5 * float(np.sum(_cross(p, np.roll(p, -1, axis=0))))


# ---------------------------------------------------------------------------
# OFF input


def read_off(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse ASCII OFF content into vertex and triangle arrays."""
    lines = [ln.split("#", 1)[0].strip() for ln in io.StringIO(text)]
    tokens = " ".join(ln for ln in lines if ln).split()
    if not tokens or not tokens[0].upper().endswith("OFF"):
        raise MeshError("OFF header missing")
    head = tokens[0].upper()
    if head not in ("OFF", "COFF"):
        raise MeshError(f"unsupported OFF variant {tokens[0]}")
    pos = 1
    try:
        nv, nf = int(tokens[pos]), int(tokens[pos + 1])
        pos += 3
        ncol = 3 + (4 if head.startswith("C") else 0)
        vals = np.array(tokens[pos : pos + nv * ncol], dtype=float).reshape(nv, ncol)
        pos += nv * ncol
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            faces.append([int(x) for x in tokens[pos + 1 : pos + 1 + k]])
            pos += 1 + k
    except (IndexError, ValueError) as exc:
        raise MeshError(f"malformed OFF content: {exc}") from None
    if any(len(f) != 3 for f in faces):
        raise MeshError("only triangular faces are supported")
    return vals[:, :3], np.array(faces, dtype=np.int64).reshape(-1, 3)


def load_mesh(source: str) -> TriMesh:
    """Build a :class:`TriMesh` from OFF file content.

    Raises
    ------
    NonManifoldEdgeError, DegenerateTriangleError, DisconnectedMeshError
        For the corresponding topological defects.
    MeshError
        For any other malformed input.
    """
    v, t = read_off(source)
    return TriMesh.from_arrays(v, t)


def write_off(mesh: TriMesh) -> str:
    out = [f"OFF\n{mesh.n_vertices} {len(mesh.triangles)} 0\n"]
    out += [f"{x!r} {y!r} 0\n" for x, y in mesh.vertices.tolist()]
    out += [f"3 {a} {b} {c}\n" for a, b, c in mesh.triangles.tolist()]
    return "".join(out)


# ---------------------------------------------------------------------------
# FEM matrices


def _cotangents(vertices, triangles):
    """cot of the angle at corner k of each triangle, shape (T, 3)."""
    p = vertices[triangles]
    out = np.empty(triangles.shape)
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        if vertices.shape[1] == 2:
            cr = np.abs(_cross(a, b))
        else:
            cr = np.linalg.norm(np.cross(a, b), axis=1)
        out[:, k] = np.einsum("ij,ij->i", a, b) / cr
    return out


def cotangent_laplacian(vertices, triangles) -> sparse.csr_matrix:
    """Cotangent stiffness matrix for 2D or 3D triangle soups."""
    n = len(vertices)
    cot = _cotangents(vertices, triangles)
    rows, cols, vals = [], [], []
    for k in range(3):
        i = triangles[:, (k + 1) % 3]
        j = triangles[:, (k + 2) % 3]
        w = -0.5 * cot[:, k]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [w, w, -w, -w]
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()


def cotangent_weights(mesh: TriMesh) -> sparse.csr_matrix:
    """Cotangent Laplacian ``L`` of the domain mesh.

    ``L[i, j] = -(cot a_ij + cot b_ij) / 2`` over the angles opposite edge
    ``(i, j)`` (a single term on boundary edges) and ``L[i, i]`` is minus the
    off-diagonal row sum. Obtuse triangles produce positive off-diagonals.
    """
    return cotangent_laplacian(mesh.vertices, mesh.triangles)


def lumped_mass(mesh: TriMesh) -> sparse.dia_matrix:
    """Barycentric lumped mass: a third of every incident triangle area."""
    area = mesh.triangle_areas()
    d = np.bincount(mesh.triangles.ravel(), weights=np.repeat(area / 3.0, 3), minlength=mesh.n_vertices)
    return sparse.diags(d)


def consistent_mass(mesh: TriMesh) -> sparse.csr_matrix:
    area = mesh.triangle_areas()
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    local = np.where(np.eye(3, dtype=bool).ravel(), 2.0, 1.0)
    vals = (area[:, None] / 12.0 * local[None, :]).ravel()
    n = mesh.n_vertices
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def boundary_mass(mesh: TriMesh, lumped: bool = False) -> sparse.csr_matrix:
    """Boundary mass ``N[i, j]``, the integral of ``phi_i phi_j`` over the boundary.

    Each boundary edge of length ``l`` contributes ``[[l/3, l/6], [l/6, l/3]]``,
    or ``l/2`` on both endpoints when ``lumped``.
    """
    e = mesh.boundary_edges()
    ell = np.linalg.norm(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]], axis=1)
    n = mesh.n_vertices
    if lumped:
        d = np.bincount(e.ravel(), weights=np.repeat(ell / 2.0, 2), minlength=n)
        return sparse.diags(d).tocsr()
    a, b = e[:, 0], e[:, 1]
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    vals = np.concatenate([ell / 3, ell / 3, ell / 6, ell / 6])
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def slot_boundary_mass(mesh: TriMesh, lumped: bool = False) -> sparse.csr_matrix:
    """Coupling between vertex hats and side-local boundary hats.

    Shape ``(n_vertices, n_slots)``. Column ``p`` integrates ``phi_i`` against
    the hat of slot ``p`` restricted to its own side, so data that jumps at
    a corner (one value per incident side) is integrated exactly.
    """
    sides = require_sides(mesh)
    rows, cols, vals = [], [], []
    off = sides.slot_offsets()
    for k, vs in enumerate(sides.vertices):
        vs = np.asarray(vs)
        a, b = vs[:-1], vs[1:]
        p = np.arange(len(vs) - 1) + off[k]
        q = p + 1
        ell = np.linalg.norm(mesh.vertices[b] - mesh.vertices[a], axis=1)
        if lumped:
            rows += [a, b]
            cols += [p, q]
            vals += [ell / 2, ell / 2]
        else:
            rows += [a, b, a, b]
            cols += [p, q, q, p]
            vals += [ell / 3, ell / 3, ell / 6, ell / 6]
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_vertices, sides.n_slots),
    ).tocsr()


# ---------------------------------------------------------------------------
# gradients and normals


@dataclass(frozen=True)
class FaceGradientOperator:
    """Per-triangle ``2 x 3`` blocks mapping corner values to the face gradient."""

    triangles: np.ndarray
    blocks: np.ndarray

    def apply(self, field) -> np.ndarray:
        """Face gradients, shape ``(T, 2)`` or ``(T, 2, m)`` for ``m`` field columns."""
        f = np.asarray(field, dtype=float)[self.triangles]
        return np.einsum("tdk,tk...->td...", self.blocks, f)


def gradient_operator(mesh: TriMesh) -> FaceGradientOperator:
    p = mesh.vertices[mesh.triangles]
    area2 = 2.0 * mesh.triangle_areas()
    blocks = np.empty((len(p), 2, 3))
    for k in range(3):
        e = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
        # gradient of the hat at corner k: opposite edge rotated by -90 deg
        blocks[:, 0, k] = -e[:, 1] / area2
        blocks[:, 1, k] = e[:, 0] / area2
    return FaceGradientOperator(mesh.triangles, blocks)


def face_gradients(mesh: TriMesh, field) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_vertices,):
        raise ValueError(f"field must have length {mesh.n_vertices}")
    return gradient_operator(mesh).apply(field)


def vertex_gradients(mesh: TriMesh, field) -> np.ndarray:
    """Area-weighted average of the incident face gradients at every vertex."""
    g = face_gradients(mesh, field)
    area = mesh.triangle_areas()
    n = mesh.n_vertices
    t = mesh.triangles.ravel()
    w = np.bincount(t, weights=np.repeat(area, 3), minlength=n)
    out = np.empty((n, 2))
    for d in range(2):
        out[:, d] = np.bincount(t, weights=np.repeat(area * g[:, d], 3), minlength=n) / w
    return out


def _edge_inward_normals(mesh: TriMesh, a, b) -> np.ndarray:
    t = mesh.vertices[b] - mesh.vertices[a]
    n = np.column_stack([-t[:, 1], t[:, 0]])
    return n / np.linalg.norm(n, axis=1)[:, None]


def inward_boundary_normals(mesh: TriMesh) -> np.ndarray:
    """Unit inward normal per boundary vertex, in ``mesh.boundary_vertices`` order.

    At every vertex the two incident boundary edge normals are averaged and
    renormalized; on straight stretches this is the exact edge normal.
    """
    out = []
    for lp in mesh.boundary_loops:
        ne = _edge_inward_normals(mesh, lp, np.roll(lp, -1))
        nv = ne + np.roll(ne, 1, axis=0)
        out.append(nv / np.linalg.norm(nv, axis=1)[:, None])
    return np.concatenate(out)


def slot_normals(mesh: TriMesh) -> np.ndarray:
    """Unit inward normal per slot, using only the edges of the slot's own side.

    Interior side vertices get the bisector of their two side edges; the two
    corners of a side get that side's end edge normal.
    """
    sides = require_sides(mesh)
    out = []
    for vs in sides.vertices:
        vs = np.asarray(vs)
        ne = _edge_inward_normals(mesh, vs[:-1], vs[1:])
        nv = np.empty((len(vs), 2))
        nv[0] = ne[0]
        nv[-1] = ne[-1]
        mid = ne[:-1] + ne[1:]
        nv[1:-1] = mid / np.linalg.norm(mid, axis=1)[:, None]
        out.append(nv)
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# sides


def require_sides(mesh: TriMesh) -> SideAssignment:
    if mesh.sides is None:
        raise SideAssignmentError("mesh has no side assignment")
    return mesh.sides


def sides_from_corners(mesh: TriMesh, corners: Sequence[Sequence[int]], labels=None) -> SideAssignment:
    """Split each boundary loop at the given corner vertices.

    ``corners[l]`` holds the corner vertices of loop ``l`` in traversal
    order; side ``k`` of that loop runs from corner ``k`` to corner ``k+1``.
    Sides are numbered loop by loop unless ``labels[l][k]`` gives the global
    index of each side. Every loop needs at least two corners.
    """
    if len(corners) != len(mesh.boundary_loops):
        raise SideAssignmentError(f"expected corners for {len(mesh.boundary_loops)} loops, got {len(corners)}")
    vertices, params, loop_sides = [], [], []
    for l, (lp, cs) in enumerate(zip(mesh.boundary_loops, corners)):
        lp = np.asarray(lp)
        pos = {int(v): i for i, v in enumerate(lp)}
        try:
            idx = [pos[int(c)] for c in cs]
        except KeyError as exc:
            raise SideAssignmentError(f"corner {exc.args[0]} is not on boundary loop {l}") from None
        if len(idx) < 2:
            raise SideAssignmentError(f"boundary loop {l} needs at least two sides")
        if len(set(idx)) != len(idx):
            raise SideAssignmentError(f"repeated corner on loop {l}")
        # rotate so corners are increasing along the loop starting at the first one
        rel = [(i - idx[0]) % len(lp) for i in idx]
        if rel != sorted(rel):
            raise SideAssignmentError(f"corners of loop {l} are not in traversal order")
        ids = []
        for k in range(len(idx)):
            a, b = idx[k], idx[(k + 1) % len(idx)]
            span = (b - a) % len(lp)
            vs = lp[(a + np.arange(span + 1)) % len(lp)]
            p = mesh.vertices[vs]
            cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])
            vertices.append(_frozen(vs, np.int64))
            params.append(_frozen(cum / cum[-1], float))
            ids.append(len(vertices) - 1)
        loop_sides.append(tuple(ids))
    if labels is not None:
        flat = [int(k) for ls in labels for k in ls]
        if sorted(flat) != list(range(len(vertices))) or [len(ls) for ls in labels] != [len(ls) for ls in loop_sides]:
            raise SideAssignmentError("side labels must number every side exactly once")
        perm = np.empty(len(vertices), dtype=int)
        for ls, lab in zip(loop_sides, labels):
            perm[list(lab)] = ls
        vertices = [vertices[i] for i in perm]
        params = [params[i] for i in perm]
        loop_sides = [tuple(int(k) for k in lab) for lab in labels]
    return SideAssignment(tuple(vertices), tuple(params), tuple(loop_sides))


def turning_angles(mesh: TriMesh, loop: int) -> np.ndarray:
    """Signed exterior angle at each vertex of a loop (radians, left turn positive)."""
    lp = mesh.boundary_loops[loop]
    p = mesh.vertices[lp]
    d_in = p - np.roll(p, 1, axis=0)
    d_out = np.roll(p, -1, axis=0) - p
    return np.arctan2(_cross(d_in, d_out), np.einsum("ij,ij->i", d_in, d_out))


def detect_corners(mesh: TriMesh, loop: int, count: Optional[int] = None, min_angle_deg: float = 20.0) -> list[int]:
    """Corner vertices of a boundary loop, in traversal order.

    With ``count`` the ``count`` sharpest turns are returned. Otherwise every
    vertex turning by more than ``min_angle_deg`` is a corner; loops with
    fewer than three such vertices are split into three sides of equal arc
    length instead. The returned list starts at the corner with the smallest
    vertex index.
    """
    lp = mesh.boundary_loops[loop]
    turn = np.abs(turning_angles(mesh, loop))
    if count is not None:
        if not 2 <= count <= len(lp):
            raise SideAssignmentError(f"cannot split a loop of {len(lp)} vertices into {count} sides")
        idx = np.sort(np.argsort(-turn, kind="stable")[:count])
    else:
        idx = np.flatnonzero(turn > np.radians(min_angle_deg))
        if len(idx) < 3:
            p = mesh.vertices[lp]
            seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
            cum = np.concatenate([[0.0], np.cumsum(seg)[:-1]]) / seg.sum()
            idx = np.unique([int(np.argmin(np.abs(cum - f))) for f in (0.0, 1 / 3, 2 / 3)])
    cs = [int(v) for v in lp[idx]]
    first = int(np.argmin(cs))
    return cs[first:] + cs[:first]


def detect_sides(mesh: TriMesh, counts: Optional[Sequence[int]] = None, min_angle_deg: float = 20.0, labels=None) -> SideAssignment:
    counts = counts if counts is not None else [None] * len(mesh.boundary_loops)
    if len(counts) != len(mesh.boundary_loops):
        raise SideAssignmentError(f"mesh has {len(mesh.boundary_loops)} boundary loops, expected {len(counts)}")
    corners = [detect_corners(mesh, l, c, min_angle_deg) for l, c in enumerate(counts)]
    return sides_from_corners(mesh, corners, labels)


def sides_from_points(
    mesh: TriMesh, loops_points: Sequence[Sequence[Sequence[float]]], labels=None, snap_tol: float = 1e-6
) -> SideAssignment:
    """Corners by nearest-point projection of domain corner positions.

    Each entry of ``loops_points`` lists the domain corners of one loop in
    traversal order; it describes the mesh loop holding the boundary vertex
    nearest to its first point. Sides are numbered in the order of
    ``loops_points`` unless ``labels`` says otherwise.

    Raises
    ------
    SideAssignmentError
        If a point lies farther than ``snap_tol`` times the bounding-box
        diagonal from every vertex of its loop.
    """
    if len(loops_points) != len(mesh.boundary_loops):
        raise SideAssignmentError(f"mesh has {len(mesh.boundary_loops)} boundary loops, got corners for {len(loops_points)}")
    if labels is None:
        off = np.cumsum([0] + [len(pts) for pts in loops_points])
        labels = [list(range(off[j], off[j + 1])) for j in range(len(loops_points))]
    bverts = mesh.boundary_vertices
    diag = float(np.linalg.norm(np.ptp(mesh.vertices, axis=0)))
    loop_of = np.concatenate([np.full(len(lp), l) for l, lp in enumerate(mesh.boundary_loops)])
    corners: list = [None] * len(mesh.boundary_loops)
    mesh_labels: list = [None] * len(mesh.boundary_loops)
    for j, pts in enumerate(loops_points):
        pts = np.asarray(pts, dtype=float)
        l = int(loop_of[np.argmin(np.linalg.norm(mesh.vertices[bverts] - pts[0], axis=1))])
        if corners[l] is not None:
            raise SideAssignmentError(f"two corner lists map to boundary loop {l}")
        lp = mesh.boundary_loops[l]
        dist = np.linalg.norm(mesh.vertices[lp][None, :, :] - pts[:, None, :], axis=2)
        nearest = dist.argmin(axis=1)
        far = dist[np.arange(len(pts)), nearest] > snap_tol * diag
        if far.any():
            raise SideAssignmentError(f"corner point {pts[np.argmax(far)].tolist()} is not on a vertex of boundary loop {l}")
        corners[l] = [int(lp[i]) for i in nearest]
        mesh_labels[l] = labels[j]
    return sides_from_corners(mesh, corners, mesh_labels)


def sides_from_triples(mesh: TriMesh, triples: Sequence[Sequence]) -> SideAssignment:
    """Side assignment from ``(vertex, side, param)`` entries.

    Corner vertices are listed once per incident side. Side order within each
    loop is taken from the traversal order of the start corners.
    """
    by_side: dict[int, list] = {}
    for v, k, t in triples:
        by_side.setdefault(int(k), []).append((float(t), int(v)))
    if sorted(by_side) != list(range(len(by_side))):
        raise SideAssignmentError("side indices must be 0..n-1")
    vertices, params = [], []
    for k in range(len(by_side)):
        items = sorted(by_side[k])
        ts = np.array([t for t, _ in items])
        if ts[0] != 0.0 or ts[-1] != 1.0 or np.any(np.diff(ts) <= 0):
            raise SideAssignmentError(f"side {k}: parameters must increase strictly from 0 to 1")
        vertices.append(_frozen([v for _, v in items], np.int64))
        params.append(_frozen(ts, float))
    loop_sides = []
    for lp in mesh.boundary_loops:
        pos = {int(v): i for i, v in enumerate(lp)}
        here = [(pos[int(vs[0])], k) for k, vs in enumerate(vertices) if int(vs[0]) in pos]
        loop_sides.append(tuple(k for _, k in sorted(here)))
    sides = SideAssignment(tuple(vertices), tuple(params), tuple(loop_sides))
    validate_sides(mesh, sides)
    return sides


def validate_sides(mesh: TriMesh, sides: SideAssignment) -> None:
    """Check that the sides tile every boundary loop edge-for-edge."""
    used = [k for ls in sides.loop_sides for k in ls]
    if sorted(used) != list(range(sides.n_sides)):
        raise SideAssignmentError("every side must belong to exactly one loop")
    for l, (lp, ls) in enumerate(zip(mesh.boundary_loops, sides.loop_sides)):
        if len(ls) < 2:
            raise SideAssignmentError(f"boundary loop {l} needs at least two sides")
        walk = []
        for i, k in enumerate(ls):
            vs = [int(v) for v in sides.vertices[k]]
            ts = np.asarray(sides.params[k])
            if len(vs) < 2 or len(ts) != len(vs):
                raise SideAssignmentError(f"side {k} is malformed")
            if ts[0] != 0.0 or ts[-1] != 1.0 or np.any(np.diff(ts) <= 0):
                raise SideAssignmentError(f"side {k}: parameters must increase strictly from 0 to 1")
            nxt = ls[(i + 1) % len(ls)]
            if vs[-1] != int(sides.vertices[nxt][0]):
                raise SideAssignmentError(f"side {k} does not end where side {nxt} starts")
            walk += vs[:-1]
        start = walk.index(int(lp[0])) if int(lp[0]) in walk else -1
        if start < 0 or walk[start:] + walk[:start] != [int(v) for v in lp]:
            raise SideAssignmentError(f"sides do not follow boundary loop {l}")
