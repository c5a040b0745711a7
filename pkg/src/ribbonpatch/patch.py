"""End-to-end patch construction from ribbons, plus curvature and blend fields."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import mesh as _mesh
from . import param as _param
from . import spline
from .assembly import BiharmonicSystem, BoundaryConditions
from .mesh import TriMesh
from .param import SideParam
from .spline import Ribbon

logger = logging.getLogger(__name__)


class CornerMismatchError(ValueError):
    def __init__(self, message, corners):
        super().__init__(message)
        self.corners = corners


@dataclass(frozen=True)
class PatchOptions:
    consistent_mass: bool = False
    lump_boundary: bool = False
    s_extension: str = "clamp-linear"
    gradient: str = "area"
    method: str = "direct"
    tol: float = 1e-12
    corner_tol: float = 1e-6


@dataclass
class PatchResult:
    surface_positions: np.ndarray
    mean_curvature: np.ndarray
    diagnostics: dict
    mesh: TriMesh = field(repr=False)
    system: BiharmonicSystem = field(repr=False)
    params: list = field(repr=False)
    ribbons: list = field(repr=False)
    bc: BoundaryConditions = field(repr=False)


def _ribbon_scale(ribbons) -> float:
    pts = np.concatenate([r.control_net.reshape(-1, 3) for r in ribbons])
    return float(max(np.linalg.norm(np.ptp(pts, axis=0)), 1e-300))


def corner_report(mesh: TriMesh, ribbons: Sequence[Ribbon]) -> list[dict]:
    """Position gap between consecutive ribbons at every domain corner."""
    sides = _mesh.require_sides(mesh)
    out = []
    for v, a, b in sides.corners():
        gap = float(np.linalg.norm(spline.eval(ribbons[a], 1.0, 0.0) - spline.eval(ribbons[b], 0.0, 0.0)))
        out.append({"vertex": v, "sides": [a, b], "position_gap": gap})
    return out


def _side_samples(ribbon: Ribbon, sp: SideParam):
    """Boundary weights of one side: (pos, d0) maps from the control net."""
    pos, ds, dh = spline.boundary_weights(ribbon, sp.params)
    dn = sp.dn_s[:, None, None] * ds + sp.dn_h[:, None, None] * dh
    return pos, dn


def sample_boundary_conditions(
    mesh: TriMesh,
    ribbons: Sequence[Ribbon],
    params: Sequence[SideParam],
    corner_tol: Optional[float] = 1e-6,
) -> BoundaryConditions:
    """Boundary positions ``R_i(s, 0)`` and chain-ruled cross-derivatives.

    ``u0`` follows ``mesh.boundary_vertices``; a corner gets the mean of the
    two incident ribbons. ``d0`` follows the side slots, so each side keeps
    its own normal derivative at its corners. ``corner_tol`` is relative to
    the control-net extent; ``None`` skips the corner check.
    """
    sides = _mesh.require_sides(mesh)
    if len(ribbons) != sides.n_sides or len(params) != sides.n_sides:
        raise ValueError(f"need one ribbon and one parameterization per side ({sides.n_sides})")
    if corner_tol is not None:
        tol = corner_tol * _ribbon_scale(ribbons)
        bad = [c for c in corner_report(mesh, ribbons) if c["position_gap"] > tol]
        if bad:
            desc = ", ".join(f"vertex {c['vertex']} (sides {c['sides'][0]}/{c['sides'][1]}, gap {c['position_gap']:.3g})" for c in bad)
            raise CornerMismatchError(f"ribbon corners do not match: {desc}", bad)

    row = {int(v): k for k, v in enumerate(mesh.boundary_vertices)}
    u0 = np.zeros((len(row), 3))
    count = np.zeros(len(row))
    d0 = []
    for r, sp in zip(ribbons, params):
        pos, dn = _side_samples(r, sp)
        idx = [row[int(v)] for v in sp.vertices]
        np.add.at(u0, idx, np.einsum("kij,ijd->kd", pos, r.control_net))
        np.add.at(count, idx, 1.0)
        d0.append(np.einsum("kij,ijd->kd", dn, r.control_net))
    return BoundaryConditions(u0 / count[:, None], np.concatenate(d0))


def vertex_normals_3d(positions, triangles) -> np.ndarray:
    p = positions[triangles]
    fn = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    out = np.zeros_like(positions)
    for k in range(3):
        np.add.at(out, triangles[:, k], fn)
    return out / np.maximum(np.linalg.norm(out, axis=1), 1e-300)[:, None]


def mixed_areas(positions, triangles) -> np.ndarray:
    """Mixed Voronoi vertex areas (circumcentric, with the obtuse-triangle fallback)."""
    p = positions[triangles]
    n = len(positions)
    cot = _mesh._cotangents(positions, triangles)
    area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    sq = np.stack([np.sum((p[:, (k + 2) % 3] - p[:, (k + 1) % 3]) ** 2, axis=1) for k in range(3)], axis=1)
    obtuse_at = cot < 0
    any_obtuse = obtuse_at.any(axis=1)
    out = np.zeros(n)
    for k in range(3):
        # Voronoi share of corner k: edges k-(k+1) and k-(k+2), weighted by opposite cotangents
        vor = (sq[:, (k + 1) % 3] * cot[:, (k + 1) % 3] + sq[:, (k + 2) % 3] * cot[:, (k + 2) % 3]) / 8.0
        a = np.where(any_obtuse, np.where(obtuse_at[:, k], area / 2, area / 4), vor)
        np.add.at(out, triangles[:, k], a)
    return out


def mean_curvature(positions, triangles, boundary=None) -> np.ndarray:
    """Signed mean curvature from the cotangent mean-curvature normal.

    ``|L x| / (2 A)`` with mixed areas, positive where ``L x`` points along the
    area-weighted vertex normal. Boundary vertices are set to NaN.
    """
    positions = np.asarray(positions, dtype=float)
    # collapsed triangles give infinite cotangents; their vertices come out NaN
    with np.errstate(divide="ignore", invalid="ignore"):
        L = _mesh.cotangent_laplacian(positions, triangles)
        Lx = L @ positions
        A = mixed_areas(positions, triangles)
        nrm = vertex_normals_3d(positions, triangles)
        H = np.linalg.norm(Lx, axis=1) / (2 * A)
    H *= np.where(np.einsum("ij,ij->i", Lx, nrm) >= 0, 1.0, -1.0)
    H[~np.isfinite(H)] = np.nan
    if boundary is not None:
        H[np.asarray(boundary)] = np.nan
    return H


def build_system(mesh: TriMesh, options: PatchOptions) -> BiharmonicSystem:
    return BiharmonicSystem(
        mesh,
        consistent_mass=options.consistent_mass,
        lump_boundary=options.lump_boundary,
        method=options.method,
        tol=options.tol,
    )


def _derivative_mismatch(mesh: TriMesh, u, bc: BoundaryConditions) -> dict:
    """Compare prescribed d0 with one-sided derivatives of the solved patch."""
    sides = _mesh.require_sides(mesh)
    sv = sides.slot_vertices()
    normals = _mesh.slot_normals(mesh)
    grads = np.stack([_mesh.vertex_gradients(mesh, u[:, d]) for d in range(u.shape[1])], axis=1)
    measured = np.einsum("kdj,kj->kd", grads[sv], normals)
    err = np.linalg.norm(measured - bc.d0, axis=1)
    ref = max(float(np.linalg.norm(bc.d0, axis=1).max()), 1e-300)
    return {"max_abs": float(err.max()), "max_rel": float(err.max() / ref), "mean_abs": float(err.mean())}


def build_patch(mesh: TriMesh, ribbons: Sequence[Ribbon], options: PatchOptions = PatchOptions()) -> PatchResult:
    """Sample ribbons through harmonic side maps, solve, and measure curvature."""
    sides = _mesh.require_sides(mesh)
    if len(ribbons) != sides.n_sides:
        raise ValueError(f"mesh has {sides.n_sides} sides but {len(ribbons)} ribbons were given")
    params = _param.all_side_parameterizations(mesh, s_extension=options.s_extension, gradient=options.gradient)
    bc = sample_boundary_conditions(mesh, ribbons, params, options.corner_tol)
    system = build_system(mesh, options)
    sol = system.solve(bc)
    x = sol.u
    H = mean_curvature(x, mesh.triangles, mesh.boundary_vertices)

    corners = corner_report(mesh, ribbons)
    off = sides.slot_offsets()
    for c in corners:
        a, b = c["sides"]
        da = bc.d0[off[a + 1] - 1]
        db = bc.d0[off[b]]
        c["d0_disagreement"] = float(np.linalg.norm(da - db))

    diag_len = float(np.linalg.norm(np.ptp(x, axis=0)))
    Hi = H[mesh.interior_vertices]
    Hi = Hi[np.isfinite(Hi)]
    diagnostics = {
        "mesh": mesh.quality(),
        "n_sides": sides.n_sides,
        "solver": {
            "residual": sol.residual,
            "mass": "consistent" if options.consistent_mass else "lumped",
            "boundary_mass": "lumped" if options.lump_boundary else "consistent",
            "method": options.method,
        },
        "corners": corners,
        "normal_derivative_mismatch": _derivative_mismatch(mesh, x, bc),
        "bbox_diagonal": diag_len,
        "mean_curvature": {
            "min": float(Hi.min()) if len(Hi) else None,
            "max": float(Hi.max()) if len(Hi) else None,
            "mean": float(Hi.mean()) if len(Hi) else None,
        },
        "planarity": planarity(x),
    }
    return PatchResult(x, H, diagnostics, mesh, system, params, list(ribbons), bc)


def planarity(points) -> dict:
    """Largest distance from the best-fit plane, absolute and per bounding-box diagonal."""
    p = np.asarray(points, dtype=float)
    c = p - p.mean(axis=0)
    normal = np.linalg.svd(c, full_matrices=False)[2][-1]
    dev = float(np.abs(c @ normal).max())
    diag = float(np.linalg.norm(np.ptp(p, axis=0)))
    return {"max_deviation": dev, "relative": dev / diag if diag > 0 else 0.0}


# ---------------------------------------------------------------------------
# blend functions


class BlendContext:
    """Shared state for evaluating control-point blend functions of one patch setup."""

    def __init__(self, system: BiharmonicSystem, params: Sequence[SideParam], ribbons: Sequence[Ribbon]):
        self.system = system
        self.params = list(params)
        self.ribbons = list(ribbons)
        self.mesh = system.mesh

    @classmethod
    def from_patch(cls, result: PatchResult) -> "BlendContext":
        return cls(result.system, result.params, result.ribbons)

    def control_points(self) -> list[tuple[int, int, int]]:
        return [(k, i, j) for k, r in enumerate(self.ribbons) for i in range(r.shape[0]) for j in range(r.shape[1])]

    def data(self, cp) -> BoundaryConditions:
        """Boundary data produced by a unit scalar at one control point, all others zero."""
        side, row, col = cp
        if not 0 <= side < len(self.ribbons):
            raise IndexError(f"side {side} out of range")
        shape = self.ribbons[side].shape
        if not (0 <= row < shape[0] and 0 <= col < shape[1]):
            raise IndexError(f"control point ({row}, {col}) outside the {shape[0]}x{shape[1]} net of side {side}")
        zero = [r.with_net(np.zeros_like(r.control_net)) for r in self.ribbons]
        net = np.zeros_like(self.ribbons[side].control_net)
        net[row, col, 0] = 1.0
        zero[side] = self.ribbons[side].with_net(net)
        bc = sample_boundary_conditions(self.mesh, zero, self.params, corner_tol=None)
        return BoundaryConditions(bc.u0[:, 0], bc.d0[:, 0])


def blend_function_field(context: BlendContext, control_point_id) -> np.ndarray:
    """Per-vertex sensitivity of the patch to unit motion of one control point.

    The boundary data are linear in the control net, so moving one point by
    a unit vector and solving gives the same field in every coordinate.
    """
    return context.system.solve(context.data(control_point_id)).u


def all_blend_fields(context: BlendContext) -> tuple[list, np.ndarray]:
    cps = context.control_points()
    bcs = [context.data(cp) for cp in cps]
    u0 = np.column_stack([b.u0 for b in bcs])
    d0 = np.column_stack([b.d0 for b in bcs])
    return cps, context.system.solve(BoundaryConditions(u0, d0)).u
