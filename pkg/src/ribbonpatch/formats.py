"""File formats: ribbon JSON, side sidecars, PLY/CSV/JSON outputs and matrix dumps.

Ribbon JSON::

    {
      "sides": [
        {"degree_s": 3, "degree_h": 1,
         "knots_s": [0, 0, 0, 0, 1, 1, 1, 1], "knots_h": [0, 0, 1, 1],
         "control_net": [[[x, y, z], [x, y, z]], ...]}
      ],
      "loops": [
        {"sides": [0, 1, 2, 3, 4], "corners": [[x, y], ...]},
        [5, 6, 7]
      ]
    }

``control_net`` rows run along ``s`` and columns along ``h``; column 0 is
the boundary curve. Knot vectors may be omitted for Bézier ribbons. The
first loop is the outer boundary (counter-clockwise); further loops bound
holes (clockwise), matched to mesh holes by their optional ``corners`` or
else in mesh order. ``corners`` holds one domain point per side, where that
side starts.

Side sidecar JSON::

    {"assignment": [[vertex, side, arc_parameter], ...]}

with corner vertices listed once per incident side.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import io as spio

from . import mesh as _mesh
from . import spline
from .mesh import SideAssignment, TriMesh
from .spline import Ribbon

logger = logging.getLogger(__name__)


class FormatError(ValueError):
    pass


@dataclass
class RibbonSet:
    ribbons: list
    loops: list
    corners: Optional[list] = None

    @property
    def n_sides(self) -> int:
        return len(self.ribbons)


def ribbon_from_dict(d: dict) -> Ribbon:
    try:
        net = np.asarray(d["control_net"], dtype=float)
        ds = int(d.get("degree_s", net.shape[0] - 1))
        dh = int(d.get("degree_h", net.shape[1] - 1))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"bad ribbon entry: {exc}") from None
    ks = d.get("knots_s") or spline.bezier_knots(ds)
    kh = d.get("knots_h") or spline.bezier_knots(dh)
    return Ribbon(ds, dh, np.asarray(ks, dtype=float), np.asarray(kh, dtype=float), net)


def ribbon_to_dict(r: Ribbon) -> dict:
    return {
        "degree_s": r.degree_s,
        "degree_h": r.degree_h,
        "knots_s": r.knots_s.tolist(),
        "knots_h": r.knots_h.tolist(),
        "control_net": r.control_net.tolist(),
    }


def parse_ribbons(doc: dict, orient: bool = True) -> RibbonSet:
    if not isinstance(doc, dict) or "sides" not in doc:
        raise FormatError("ribbon JSON needs a 'sides' list")
    ribbons = [ribbon_from_dict(d) for d in doc["sides"]]
    raw = doc.get("loops") or [list(range(len(ribbons)))]
    loops, corners = [], []
    for entry in raw:
        if isinstance(entry, dict):
            loops.append([int(k) for k in entry["sides"]])
            corners.append(entry.get("corners"))
        else:
            loops.append([int(k) for k in entry])
            corners.append(None)
    flat = sorted(k for lp in loops for k in lp)
    if flat != list(range(len(ribbons))):
        raise FormatError("'loops' must list every side exactly once")
    for lp, cs in zip(loops, corners):
        if cs is not None and len(cs) != len(lp):
            raise FormatError("each loop needs one corner per side")
    if any(c is None for c in corners):
        if any(c is not None for c in corners):
            raise FormatError("give corners for every loop or for none")
        corners = None
    rs = RibbonSet(ribbons, loops, corners)
    if orient:
        orient_ribbons(rs)
    return rs


def load_ribbons(text: str, orient: bool = True) -> RibbonSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"ribbon file is not valid JSON: {exc}") from None
    return parse_ribbons(doc, orient)


def dump_ribbons(rs: RibbonSet) -> str:
    loops = []
    for i, lp in enumerate(rs.loops):
        if rs.corners is not None:
            loops.append({"sides": list(lp), "corners": np.asarray(rs.corners[i], dtype=float).tolist()})
        else:
            loops.append(list(lp))
    return json.dumps({"sides": [ribbon_to_dict(r) for r in rs.ribbons], "loops": loops}, indent=1) + "\n"


def orient_ribbons(rs: RibbonSet) -> list[int]:
    """Reverse ribbons whose ``s`` runs against their loop; returns the reversed sides.

    A ribbon is flipped when its end meets the neighbouring ribbons better
    after reversal. Loops of two sides carry no orientation information.
    """
    flipped = []
    for lp in rs.loops:
        if len(lp) < 3:
            continue
        ends = {k: (spline.eval(rs.ribbons[k], 0.0, 0.0), spline.eval(rs.ribbons[k], 1.0, 0.0)) for k in lp}
        for i, k in enumerate(lp):
            prev, nxt = lp[i - 1], lp[(i + 1) % len(lp)]
            start, end = ends[k]

            def gap(p, side):
                return min(np.linalg.norm(p - q) for q in ends[side])

            fwd = gap(end, nxt) + gap(start, prev)
            rev = gap(start, nxt) + gap(end, prev)
            if rev < fwd:
                rs.ribbons[k] = rs.ribbons[k].reversed_s()
                flipped.append(k)
                warnings.warn(f"ribbon {k} runs against its loop; reversed its s direction", stacklevel=2)
    return flipped


def load_sidecar(text: str) -> list:
    try:
        doc = json.loads(text)
        return [(int(v), int(k), float(t)) for v, k, t in doc["assignment"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad side sidecar: {exc}") from None


def dump_sidecar(sides: SideAssignment) -> str:
    return json.dumps({"assignment": [list(t) for t in sides.to_triples()]}) + "\n"


def assign_sides(mesh: TriMesh, rs: RibbonSet, sidecar: Optional[list] = None) -> TriMesh:
    """Attach a side assignment matching the ribbon loops.

    Priority: explicit sidecar, then domain corners from the ribbon file,
    then corner detection with the ribbon count of each loop.
    """
    if sidecar is not None:
        sides = _mesh.sides_from_triples(mesh, sidecar)
        if sides.n_sides != rs.n_sides:
            raise FormatError(f"sidecar defines {sides.n_sides} sides, ribbon file {rs.n_sides}")
        for lp in rs.loops:
            if not any(set(lp) == set(ls) for ls in sides.loop_sides):
                raise FormatError(f"ribbon loop {lp} does not match a boundary loop of the sidecar")
    elif rs.corners is not None:
        sides = _mesh.sides_from_points(mesh, rs.corners, labels=rs.loops)
    else:
        if len(rs.loops) != len(mesh.boundary_loops):
            raise FormatError(f"mesh has {len(mesh.boundary_loops)} boundary loops, ribbon file {len(rs.loops)}")
        sides = _mesh.detect_sides(mesh, [len(lp) for lp in rs.loops], labels=rs.loops)
    return mesh.with_sides(sides)


# ---------------------------------------------------------------------------
# outputs


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else format(float(x), ".17g")


def diverging_colors(values, scale: Optional[float] = None) -> np.ndarray:
    """Blue-white-red map symmetric about zero; NaN becomes grey."""
    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    if scale is None:
        scale = float(np.abs(v[finite]).max()) if finite.any() else 1.0
    t = np.clip(np.where(finite, v, 0.0) / (scale if scale > 0 else 1.0), -1, 1)
    white = np.array([255.0, 255.0, 255.0])
    red = np.array([178.0, 24.0, 43.0])
    blue = np.array([33.0, 102.0, 172.0])
    pos = white + np.clip(t, 0, 1)[:, None] * (red - white)
    neg = white + np.clip(-t, 0, 1)[:, None] * (blue - white)
    rgb = np.where((t >= 0)[:, None], pos, neg)
    rgb[~finite] = 128
    return np.rint(rgb).astype(np.uint8)


def sign_split_colors(values) -> np.ndarray:
    """White-to-blue for non-negative values, yellow for negative ones."""
    v = np.asarray(values, dtype=float)
    top = max(float(v.max()), 1e-300)
    low = max(float(-v.min()), 1e-300)
    white = np.array([255.0, 255.0, 255.0])
    blue = np.array([8.0, 48.0, 107.0])
    yellow = np.array([255.0, 221.0, 0.0])
    pale = np.array([255.0, 247.0, 188.0])
    pos = white + np.clip(v / top, 0, 1)[:, None] * (blue - white)
    neg = pale + np.clip(-v / low, 0, 1)[:, None] * (yellow - pale)
    return np.rint(np.where((v < 0)[:, None], neg, pos)).astype(np.uint8)


def write_ply(positions, triangles, colors, scalar=None, flag=None, scalar_name="value", flag_name="negative") -> str:
    """ASCII PLY with per-vertex colours and optional scalar/flag properties."""
    p = np.asarray(positions, dtype=float)
    if p.shape[1] == 2:
        p = np.column_stack([p, np.zeros(len(p))])
    head = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(p)}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
    ]
    if scalar is not None:
        head.append(f"property double {scalar_name}")
    if flag is not None:
        head.append(f"property uchar {flag_name}")
    head += [f"element face {len(triangles)}", "property list uchar int vertex_indices", "end_header"]
    lines = []
    for i in range(len(p)):
        row = [_fmt(c) for c in p[i]] + [str(int(c)) for c in colors[i]]
        if scalar is not None:
            row.append(_fmt(scalar[i]))
        if flag is not None:
            row.append(str(int(flag[i])))
        lines.append(" ".join(row))
    lines += [f"3 {a} {b} {c}" for a, b, c in np.asarray(triangles).tolist()]
    return "\n".join(head + lines) + "\n"


def write_scalar_csv(values, header=("vertex", "value")) -> str:
    out = [",".join(header)]
    out += [f"{i},{_fmt(v)}" for i, v in enumerate(np.asarray(values, dtype=float))]
    return "\n".join(out) + "\n"


def write_table_csv(header, rows) -> str:
    out = [",".join(header)]
    for r in rows:
        out.append(",".join(str(x) if isinstance(x, (int, np.integer)) else _fmt(x) for x in r))
    return "\n".join(out) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dump_json(obj) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as null."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def dump_matrix(path, A, comment: str = "") -> None:
    """Write a sparse matrix in MatrixMarket coordinate format."""
    spio.mmwrite(str(path), A.tocoo(), comment=comment)
