"""Command-line driver: ``ribbonpatch {build,blend,param,convergence,demo}``.

Exit codes: 0 success, 1 pipeline failure (error JSON on stderr), 2 usage
error. Options may also come from a JSON file given with ``--config``;
command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import assembly, demo, domains, formats
from . import mesh as _mesh
from . import param as _param
from . import patch as _patch
from ._linalg import SolverError

logger = logging.getLogger("ribbonpatch")

CASES = ("linear", "quadratic-biharmonic")


class UsageError(Exception):
    pass


@dataclass
class JobConfig:
    command: str
    mesh: Optional[str] = None
    ribbons: Optional[str] = None
    sides: Optional[str] = None
    output: str = "."
    consistent_mass: bool = False
    lump_boundary: bool = False
    s_extension: str = "clamp-linear"
    gradient: str = "area"
    solver: str = "direct"
    tol: float = 1e-12
    corner_tol: float = 1e-6
    levels: int = 3
    base: int = 9
    factor: int = 2
    case: str = "quadratic-biharmonic"
    side: Optional[int] = None
    cp: Optional[list] = None
    demo: Optional[str] = None
    refine: int = 0
    dump_matrices: bool = False
    extra: dict = field(default_factory=dict)

    def validate(self):
        for name in ("mesh", "ribbons", "sides"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise UsageError(f"{name} file not found: {p}")
        if not self.tol > 0:
            raise UsageError("tolerance must be positive")
        if not 0 <= self.levels <= 6:
            raise UsageError("refinement levels must lie in [0, 6]")
        if not 0 <= self.refine <= 6:
            raise UsageError("refinement levels must lie in [0, 6]")
        if self.s_extension not in _param.S_EXTENSIONS:
            raise UsageError(f"s-extension must be one of {_param.S_EXTENSIONS}")
        if self.gradient not in _param.GRADIENT_METHODS:
            raise UsageError(f"gradient must be one of {_param.GRADIENT_METHODS}")
        if self.solver not in ("direct", "cg"):
            raise UsageError("solver must be 'direct' or 'cg'")
        if self.case not in CASES:
            raise UsageError(f"unknown case {self.case!r}; choose from {CASES}")
        if self.base < 1 or self.factor < 2:
            raise UsageError("base must be >= 1 and factor >= 2")

    def patch_options(self) -> _patch.PatchOptions:
        return _patch.PatchOptions(
            consistent_mass=self.consistent_mass,
            lump_boundary=self.lump_boundary,
            s_extension=self.s_extension,
            gradient=self.gradient,
            method=self.solver,
            tol=self.tol,
            corner_tol=self.corner_tol,
        )


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ribbonpatch", description="Ribbon-based biharmonic surface patches.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solver=True):
        sp.add_argument("-o", "--output", default=argparse.SUPPRESS, help="output directory")
        sp.add_argument("--config", help="JSON file with option defaults")
        if solver:
            sp.add_argument("--consistent-mass", action="store_true", default=argparse.SUPPRESS)
            sp.add_argument("--lump-boundary", action="store_true", default=argparse.SUPPRESS)
            sp.add_argument("--solver", choices=("direct", "cg"), default=argparse.SUPPRESS)
            sp.add_argument("--tol", type=float, default=argparse.SUPPRESS)

    def inputs(sp, ribbons_required=True):
        sp.add_argument("mesh", help="OFF mesh of the planar domain")
        if ribbons_required:
            sp.add_argument("ribbons", help="ribbon JSON")
        else:
            sp.add_argument("--ribbons", default=argparse.SUPPRESS, help="ribbon JSON (for loops and corners)")
        sp.add_argument("--sides", default=argparse.SUPPRESS, help="side-assignment sidecar JSON")
        sp.add_argument("--s-extension", choices=_param.S_EXTENSIONS, default=argparse.SUPPRESS)
        sp.add_argument("--gradient", choices=_param.GRADIENT_METHODS, default=argparse.SUPPRESS)

    b = sub.add_parser("build", help="build a patch, its curvature map and diagnostics")
    inputs(b)
    common(b)
    b.add_argument("--corner-tol", type=float, default=argparse.SUPPRESS)
    b.add_argument("--dump-matrices", action="store_true", default=argparse.SUPPRESS)

    bl = sub.add_parser("blend", help="blend function of one control point")
    inputs(bl)
    common(bl)
    bl.add_argument("--cp", nargs=3, type=int, metavar=("SIDE", "ROW", "COL"), required=True)

    pa = sub.add_parser("param", help="harmonic (s, h) fields of one side")
    inputs(pa, ribbons_required=False)
    common(pa, solver=False)
    pa.add_argument("--side", type=int, required=True)

    cv = sub.add_parser("convergence", help="refinement study on the unit square")
    common(cv)
    cv.add_argument("--case", default=argparse.SUPPRESS)
    cv.add_argument("--levels", type=int, default=argparse.SUPPRESS)
    cv.add_argument("--base", type=int, default=argparse.SUPPRESS)
    cv.add_argument("--factor", type=int, default=argparse.SUPPRESS)

    de = sub.add_parser("demo", help="write a demo mesh and ribbon file")
    de.add_argument("demo", choices=demo.DEMOS)
    de.add_argument("-o", "--output", default=argparse.SUPPRESS)
    de.add_argument("--refine", type=int, default=argparse.SUPPRESS)
    return p


def make_config(argv) -> JobConfig:
    args = vars(_parser().parse_args(argv))
    cfg_path = args.pop("config", None)
    verbose = args.pop("verbose", False)
    values = {}
    if cfg_path:
        try:
            values.update(json.loads(Path(cfg_path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg_path}: {exc}") from None
    values.update(args)
    known = {f.name for f in fields(JobConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    cfg = JobConfig(**values)
    cfg.extra["verbose"] = verbose
    cfg.validate()
    return cfg


@contextlib.contextmanager
def _thread_cap():
    cap = os.environ.get("RIBBONPATCH_THREADS")
    if not cap:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=int(cap)):
        yield


def _load_inputs(cfg: JobConfig):
    m = _mesh.load_mesh(Path(cfg.mesh).read_text())
    rs = formats.load_ribbons(Path(cfg.ribbons).read_text()) if cfg.ribbons else None
    sidecar = formats.load_sidecar(Path(cfg.sides).read_text()) if cfg.sides else None
    if rs is not None:
        m = formats.assign_sides(m, rs, sidecar)
    elif sidecar is not None:
        m = m.with_sides(_mesh.sides_from_triples(m, sidecar))
    else:
        m = m.with_sides(_mesh.detect_sides(m))
    return m, rs


def _sig(x, digits=6):
    if x is None or not np.isfinite(x):
        return None
    return float(f"{x:.{digits}g}")


def _write(out: Path, files: dict):
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)


def cmd_build(cfg: JobConfig) -> dict:
    m, rs = _load_inputs(cfg)
    res = _patch.build_patch(m, rs.ribbons, cfg.patch_options())
    d = res.diagnostics
    d["summary"] = {
        "n_vertices": m.n_vertices,
        "n_triangles": len(m.triangles),
        "n_sides": d["n_sides"],
        "n_boundary_loops": len(m.boundary_loops),
        "residual_ok": d["solver"]["residual"] <= assembly.RESIDUAL_TOL,
        "bbox_diagonal": _sig(d["bbox_diagonal"]),
        "mean_curvature": {k: _sig(v, 5) for k, v in d["mean_curvature"].items()},
        "planar_relative_deviation_below_1e-8": d["planarity"]["relative"] < 1e-8,
        "max_corner_gap_below_tol": max(c["position_gap"] for c in d["corners"]) <= cfg.corner_tol * d["bbox_diagonal"] + 1e-300,
        "min_angle_deg": _sig(d["mesh"]["min_angle_deg"], 5),
    }
    colors = formats.diverging_colors(res.mean_curvature)
    files = {
        "patch.ply": formats.write_ply(res.surface_positions, m.triangles, colors, scalar=res.mean_curvature, scalar_name="mean_curvature"),
        "curvature.csv": formats.write_scalar_csv(res.mean_curvature, ("vertex", "mean_curvature")),
        "diagnostics.json": formats.dump_json(d),
    }
    out = Path(cfg.output)
    _write(out, files)
    if cfg.dump_matrices:
        s = res.system
        for name, A in (("L", s.L), ("M", s.M), ("N", s.N), ("reduced", s.reduced)):
            if A is not None:
                formats.dump_matrix(out / f"{name}.mtx", A)
    return d["summary"]


def cmd_blend(cfg: JobConfig) -> dict:
    m, rs = _load_inputs(cfg)
    opts = cfg.patch_options()
    params = _param.all_side_parameterizations(m, s_extension=opts.s_extension, gradient=opts.gradient)
    ctx = _patch.BlendContext(_patch.build_system(m, opts), params, rs.ribbons)
    cp = tuple(cfg.cp)
    try:
        ctx.data(cp)
    except IndexError as exc:
        raise UsageError(str(exc)) from None
    cps, F = _patch.all_blend_fields(ctx)
    f = F[:, cps.index(cp)]
    total = F.sum(axis=1)
    d = {
        "control_point": {"side": cp[0], "row": cp[1], "column": cp[2]},
        "min": float(f.min()),
        "max": float(f.max()),
        "negative": bool(f.min() < 0),
        "n_negative_vertices": int(np.count_nonzero(f < 0)),
        "partition_of_unity_max_error": float(np.abs(total - 1).max()),
        "n_control_points": len(cps),
    }
    neg = (f < 0).astype(np.uint8)
    files = {
        "blend.ply": formats.write_ply(m.vertices, m.triangles, formats.sign_split_colors(f), scalar=f, flag=neg),
        "blend.csv": formats.write_scalar_csv(f, ("vertex", "blend")),
        "blend_diagnostics.json": formats.dump_json(d),
    }
    _write(Path(cfg.output), files)
    return d


def cmd_param(cfg: JobConfig) -> dict:
    m, _ = _load_inputs(cfg)
    n = m.sides.n_sides
    if cfg.side is None or not 0 <= cfg.side < n:
        raise UsageError(f"side {cfg.side} out of range (mesh has {n} sides)")
    sp = _param.side_parameterization(m, cfg.side, s_extension=cfg.s_extension, gradient=cfg.gradient)
    k = cfg.side
    fields_csv = formats.write_table_csv(("vertex", "s", "h"), [(i, a, b) for i, (a, b) in enumerate(zip(sp.s_field, sp.h_field))])
    dn_csv = formats.write_table_csv(
        ("vertex", "arc", "dn_s", "dn_h"),
        [(int(v), t, a, b) for v, t, a, b in zip(sp.vertices, sp.params, sp.dn_s, sp.dn_h)],
    )
    _write(Path(cfg.output), {f"param_side{k}.csv": fields_csv, f"normal_derivatives_side{k}.csv": dn_csv})
    return {"side": k, "dn_h_min": float(sp.dn_h.min()), "dn_h_max": float(sp.dn_h.max())}


def analytic_case(name: str):
    """``(u, grad u)`` of the named reference solution."""
    if name == "linear":
        return (lambda p: 0.3 + p[:, 0] - 2.0 * p[:, 1]), (lambda p: np.tile([1.0, -2.0], (len(p), 1)))
    if name == "quadratic-biharmonic":
        return (lambda p: (p**2).sum(axis=1)), (lambda p: 2.0 * p)
    raise KeyError(name)


def convergence_study(case: str, sizes, **system_kwargs) -> list[dict]:
    """Max interior error of the biharmonic solve for exact data on unit-square fan meshes."""
    u, grad = analytic_case(case)
    rows = []
    for n in sizes:
        m = domains.unit_square(n)
        sys_ = assembly.BiharmonicSystem(m, **system_kwargs)
        p = m.vertices
        sv = m.sides.slot_vertices()
        d0 = np.einsum("ij,ij->i", grad(p[sv]), _mesh.slot_normals(m))
        sol = sys_.solve(assembly.BoundaryConditions(u(p[m.boundary_vertices]), d0))
        err = float(np.abs(sol.u - u(p))[m.interior_vertices].max())
        rows.append({"n": n, "n_vertices": m.n_vertices, "n_triangles": len(m.triangles), "h": 1.0 / n, "max_error": err, "residual": sol.residual})
    for a, b in zip(rows, rows[1:]):
        b["order"] = float(np.log(a["max_error"] / b["max_error"]) / np.log(a["h"] / b["h"])) if b["max_error"] > 0 else float("inf")
    return rows


def cmd_convergence(cfg: JobConfig) -> dict:
    sizes = [cfg.base * cfg.factor**k for k in range(cfg.levels)]
    rows = convergence_study(cfg.case, sizes, consistent_mass=cfg.consistent_mass, lump_boundary=cfg.lump_boundary, method=cfg.solver, tol=cfg.tol)
    errs = [r["max_error"] for r in rows]
    if cfg.case == "linear":
        ok = all(e <= 1e-8 for e in errs)
    else:
        ok = all(b < a for a, b in zip(errs, errs[1:]))
    table = formats.write_table_csv(
        ("level", "n_vertices", "n_triangles", "h", "max_interior_error", "order"),
        [(k, r["n_vertices"], r["n_triangles"], r["h"], r["max_error"], r.get("order", float("nan"))) for k, r in enumerate(rows)],
    )
    _write(Path(cfg.output), {f"convergence_{cfg.case}.csv": table})
    report = {"case": cfg.case, "errors": errs, "passed": ok}
    if not ok:
        raise PipelineCheckFailed(f"convergence check failed for {cfg.case}: errors {errs}")
    return report


class PipelineCheckFailed(RuntimeError):
    pass


def cmd_demo(cfg: JobConfig) -> dict:
    m, ribbons, loops = demo.make_demo(cfg.demo, cfg.refine)
    sides = m.sides
    rs = formats.RibbonSet(ribbons, [list(ls) for ls in sides.loop_sides], [np.asarray(lp).tolist() for lp in loops])
    _write(Path(cfg.output), {f"{cfg.demo}.off": _mesh.write_off(m), f"{cfg.demo}.json": formats.dump_ribbons(rs)})
    return {"demo": cfg.demo, "n_vertices": m.n_vertices}


COMMANDS = {
    "build": cmd_build,
    "blend": cmd_blend,
    "param": cmd_param,
    "convergence": cmd_convergence,
    "demo": cmd_demo,
}


def _error(kind: str, exc: BaseException) -> str:
    d = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    if getattr(exc, "residual", None) is not None:
        d["residual"] = exc.residual
    return json.dumps(d, sort_keys=True)


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
    except UsageError as exc:
        print(_error("usage", exc), file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if cfg.extra.get("verbose") else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_cap():
            summary = COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(_error("usage", exc), file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, SolverError, PipelineCheckFailed, OSError, IndexError, KeyError) as exc:
        print(_error("pipeline", exc), file=sys.stderr)
        return 1
    print(json.dumps(formats._clean(summary), sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
