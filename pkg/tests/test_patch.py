import numpy as np
import pytest
from scipy.spatial import cKDTree

from conftest import NONCONVEX_CENTER, NONCONVEX_PENTAGON
from ribbonpatch import assembly, demo, domains, param, patch, spline
from ribbonpatch import mesh as M
from ribbonpatch.assembly import BoundaryConditions
from ribbonpatch.spline import Ribbon


def flat_ribbons(poly, width=0.25):
    lift, cross = demo.graph_lift(lambda p: 0.0, lambda p: np.zeros(2))
    return demo.polygon_ribbons([poly], lift, cross, width)


def mirror_index(m):
    d, idx = cKDTree(m.vertices).query(m.vertices * [-1, 1])
    assert d.max() < 1e-12
    return idx


def sphere_cap_solution(radius_domain, n, r=1.0):
    """Biharmonic patch from position and normal-derivative data sampled on a sphere of radius r."""
    m = domains.fan_mesh(domains.regular_polygon(6, radius_domain), n)
    p = m.vertices

    def lift(q):
        return np.column_stack([q, np.sqrt(r * r - (q**2).sum(1))])

    q = p[m.sides.slot_vertices()]
    z = np.sqrt(r * r - (q**2).sum(1))
    nrm = M.slot_normals(m)
    # directional derivative of (x, y, z(x, y)) along the inward normal
    d0 = np.column_stack([nrm, -(q * nrm).sum(1) / z])
    u = assembly.BiharmonicSystem(m).solve(BoundaryConditions(lift(p[m.boundary_vertices]), d0)).u
    return m, u


# ---------------------------------------------------------------------------
# boundary sampling


def test_constant_ribbons_give_constant_patch():
    m = domains.fan_mesh(domains.regular_polygon(5), 4)
    P = np.array([0.3, -2.0, 1.5])
    ribbons = [Ribbon.bezier(np.broadcast_to(P, (4, 2, 3))) for _ in range(5)]
    res = patch.build_patch(m, ribbons)
    np.testing.assert_allclose(res.bc.u0, np.broadcast_to(P, res.bc.u0.shape), atol=1e-15)
    assert np.abs(res.bc.d0).max() < 1e-14
    np.testing.assert_allclose(res.surface_positions, np.broadcast_to(P, res.surface_positions.shape), atol=1e-12)


def folded(m, x):
    return int(np.count_nonzero(M._signed_areas(x[:, :2], m.triangles) <= 0))


@pytest.mark.parametrize("name", ["square-fan", "pentagon-fan", "nonconvex-pentagon", "square-annulus"])
def test_planar_ribbons_give_planar_patch(meshes, name):
    m = meshes[name]
    loops = [m.vertices[[m.sides.vertices[k][0] for k in ls]] for ls in m.sides.loop_sides]
    lift, cross = demo.graph_lift(lambda p: 0.0, lambda p: np.zeros(2))
    res = patch.build_patch(m, demo.polygon_ribbons(loops, lift, cross))
    assert np.abs(res.bc.u0[:, 2]).max() == 0 and np.abs(res.bc.d0[:, 2]).max() == 0
    assert np.abs(res.surface_positions[:, 2]).max() <= 1e-8
    assert res.diagnostics["planarity"]["relative"] < 1e-8
    if folded(m, res.surface_positions) == 0:
        H = res.mean_curvature[m.interior_vertices]
        assert np.abs(H).max() * res.diagnostics["bbox_diagonal"] < 1e-6


def test_planar_patch_can_fold_near_a_reflex_corner(meshes):
    """Weak derivative data do not prevent fold-over; the patch stays in its plane regardless."""
    m = meshes["nonconvex-pentagon"]
    res = patch.build_patch(m, flat_ribbons(NONCONVEX_PENTAGON))
    assert folded(m, res.surface_positions) > 0
    assert np.abs(res.surface_positions[:, 2]).max() <= 1e-8


def test_constant_patch_curvature_is_undefined():
    m = domains.fan_mesh(domains.regular_polygon(5), 3)
    ribbons = [Ribbon.bezier(np.ones((4, 2, 3))) for _ in range(5)]
    with np.errstate(all="raise"):
        res = patch.build_patch(m, ribbons)
    assert np.all(np.isnan(res.mean_curvature))
    assert res.diagnostics["mean_curvature"]["max"] is None


def test_flat_bottom_ribbon_cross_derivative():
    m = domains.unit_square(8)
    corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    ribbons = flat_ribbons(corners, width=1.0)
    np.testing.assert_allclose(ribbons[0].eval(0.3, 0.6), [0.3, 0.6, 0.0], atol=1e-14)
    params = param.all_side_parameterizations(m)
    bc = patch.sample_boundary_conditions(m, ribbons, params)
    d = bc.d0[: len(m.sides.vertices[0])]
    sp = params[0]
    np.testing.assert_allclose(d[:, 0], sp.dn_s, atol=1e-13)
    np.testing.assert_allclose(d[:, 1], sp.dn_h, atol=1e-13)
    assert np.all(d[:, 2] == 0)


def test_boundary_positions_interpolated():
    m, ribbons, _ = demo.vertex_blend(6)
    res = patch.build_patch(m, ribbons)
    row = {int(v): k for k, v in enumerate(m.boundary_vertices)}
    for r, vs, ts in zip(ribbons, m.sides.vertices, m.sides.params):
        for v, t in zip(vs, ts):
            np.testing.assert_allclose(res.surface_positions[v], r.eval(t, 0.0), atol=1e-14)
            np.testing.assert_array_equal(res.surface_positions[v], res.bc.u0[row[int(v)]])


def test_corner_mismatch_reported():
    m, ribbons, _ = demo.vertex_blend(4)
    net = np.array(ribbons[2].control_net)
    net[-1, 0] += [0.0, 0.0, 0.1]
    bad = list(ribbons)
    bad[2] = ribbons[2].with_net(net)
    with pytest.raises(patch.CornerMismatchError, match="sides 2/3"):
        patch.build_patch(m, bad)
    # the check can be switched off
    patch.build_patch(m, bad, patch.PatchOptions(corner_tol=None))


def test_ribbon_count_must_match():
    m, ribbons, _ = demo.vertex_blend(4)
    with pytest.raises(ValueError):
        patch.build_patch(m, ribbons[:4])


# ---------------------------------------------------------------------------
# whole-pipeline properties


def test_mirror_symmetric_inputs(meshes):
    for make in (lambda: demo.vertex_blend(8), lambda: demo.multiply_connected(6, 4)):
        m, ribbons, _ = make()
        idx = mirror_index(m)
        u = patch.build_patch(m, ribbons).surface_positions
        np.testing.assert_allclose(u[idx] * [-1, 1, 1], u, atol=1e-8)


def test_affine_equivariance():
    m, ribbons, _ = demo.vertex_blend(6)
    rng = np.random.default_rng(0)
    A = rng.uniform(-1, 1, (3, 3)) + 2 * np.eye(3)
    b = rng.uniform(-3, 3, 3)
    moved = [r.with_net(r.control_net @ A.T + b) for r in ribbons]
    u = patch.build_patch(m, ribbons).surface_positions
    v = patch.build_patch(m, moved).surface_positions
    np.testing.assert_allclose(v, u @ A.T + b, atol=1e-9)


def test_linear_in_control_points():
    m, ribbons, _ = demo.vertex_blend(6)
    rng = np.random.default_rng(1)
    nets1 = [rng.standard_normal(r.control_net.shape) for r in ribbons]
    nets2 = [rng.standard_normal(r.control_net.shape) for r in ribbons]
    a, b = rng.standard_normal(2)
    opts = patch.PatchOptions(corner_tol=None)

    def solve(nets):
        return patch.build_patch(m, [r.with_net(n) for r, n in zip(ribbons, nets)], opts).surface_positions

    mix = solve([a * x + b * y for x, y in zip(nets1, nets2)])
    np.testing.assert_allclose(mix, a * solve(nets1) + b * solve(nets2), atol=1e-10)


def test_options_reach_the_solver():
    m, ribbons, _ = demo.vertex_blend(6)
    base = patch.build_patch(m, ribbons)
    for opts in (
        patch.PatchOptions(consistent_mass=True),
        patch.PatchOptions(lump_boundary=True),
        patch.PatchOptions(method="cg"),
        patch.PatchOptions(gradient="one-sided"),
        patch.PatchOptions(s_extension="nearest"),
    ):
        res = patch.build_patch(m, ribbons, opts)
        assert res.diagnostics["solver"]["residual"] <= assembly.RESIDUAL_TOL
        # all variants interpolate the same boundary
        b = m.boundary_vertices
        np.testing.assert_allclose(res.surface_positions[b], base.surface_positions[b], atol=1e-13)
    cg = patch.build_patch(m, ribbons, patch.PatchOptions(method="cg"))
    np.testing.assert_allclose(cg.surface_positions, base.surface_positions, atol=1e-8)


def test_diagnostics_content():
    m, ribbons, _ = demo.multiply_connected(4, 3)
    d = patch.build_patch(m, ribbons).diagnostics
    assert d["n_sides"] == 10
    assert d["mesh"]["n_boundary_loops"] == 2
    assert len(d["corners"]) == 10
    assert all(c["position_gap"] < 1e-12 for c in d["corners"])
    assert all(c["d0_disagreement"] >= 0 for c in d["corners"])
    assert d["solver"]["residual"] <= 1e-10
    assert set(d["normal_derivative_mismatch"]) == {"max_abs", "max_rel", "mean_abs"}


def test_normal_derivative_mismatch_shrinks_on_exact_data():
    errs = []
    for n in (6, 12, 24):
        m = domains.unit_square(n)
        p = m.vertices
        d0 = np.einsum("ij,ij->i", 2 * p[m.sides.slot_vertices()], M.slot_normals(m))
        bc = BoundaryConditions((p[m.boundary_vertices] ** 2).sum(1)[:, None], d0[:, None])
        u = assembly.BiharmonicSystem(m).solve(bc).u
        errs.append(patch._derivative_mismatch(m, u, bc)["max_abs"])
    assert errs[0] > errs[1] > errs[2]


# ---------------------------------------------------------------------------
# mean curvature


def test_curvature_estimator_on_exact_shapes():
    m = domains.fan_mesh(domains.regular_polygon(6, 0.3), 12)
    p = m.vertices
    inner = m.interior_vertices
    sphere = np.column_stack([p, np.sqrt(4.0 - (p**2).sum(1))])
    H = patch.mean_curvature(sphere, m.triangles, m.boundary_vertices)
    np.testing.assert_allclose(H[inner], 0.5, rtol=1e-6)
    assert np.all(np.isnan(H[m.boundary_vertices]))
    plane = np.column_stack([p, 0.2 * p[:, 0] - p[:, 1]])
    assert np.abs(patch.mean_curvature(plane, m.triangles)[inner]).max() < 1e-10
    # flipping the surface flips the sign
    H2 = patch.mean_curvature(sphere * [1, 1, -1], m.triangles[:, [0, 2, 1]])
    np.testing.assert_allclose(H2[inner], H[inner], rtol=1e-9)


def test_sphere_cap_curvature():
    errs = []
    for n in (8, 16, 32):
        m, u = sphere_cap_solution(0.3, n)
        H = patch.mean_curvature(u, m.triangles, m.boundary_vertices)
        away = np.linalg.norm(m.vertices, axis=1) < 0.15
        errs.append(np.abs(H[away] - 1.0).max())
    assert errs[-1] < 0.05
    assert errs[0] >= errs[1] >= errs[2]


def test_mixed_areas_sum_to_surface_area():
    m = domains.perturb_interior(domains.grid_mesh(8, 8), 0.3, seed=1)
    x = np.column_stack([m.vertices, 0.3 * m.vertices[:, 0] ** 2])
    p = x[m.triangles]
    total = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1).sum()
    assert patch.mixed_areas(x, m.triangles).sum() == pytest.approx(total, rel=1e-12)


# ---------------------------------------------------------------------------
# blend functions


@pytest.fixture(scope="module")
def pentagon_blend():
    m = domains.fan_mesh(NONCONVEX_PENTAGON, 8, center=NONCONVEX_CENTER)
    ribbons = flat_ribbons(NONCONVEX_PENTAGON)
    ctx = patch.BlendContext(patch.build_system(m, patch.PatchOptions()), param.all_side_parameterizations(m), ribbons)
    return ctx, patch.all_blend_fields(ctx)


def test_blend_partition_of_unity(pentagon_blend):
    _, (cps, F) = pentagon_blend
    assert len(cps) == 5 * 4 * 2
    assert np.abs(F.sum(axis=1) - 1).max() < 1e-8


def test_blend_field_equals_forward_perturbation():
    m, ribbons, _ = demo.vertex_blend(5)
    res = patch.build_patch(m, ribbons)
    ctx = patch.BlendContext.from_patch(res)
    cp = (2, 1, 1)
    f = patch.blend_function_field(ctx, cp)
    net = np.array(ribbons[2].control_net)
    net[1, 1] += [0.0, 0.0, 1.0]
    moved = list(ribbons)
    moved[2] = ribbons[2].with_net(net)
    diff = patch.build_patch(m, moved).surface_positions - res.surface_positions
    np.testing.assert_allclose(diff[:, 2], f, atol=1e-10)
    np.testing.assert_allclose(diff[:, :2], 0.0, atol=1e-10)


def test_boundary_row_field_on_its_side(pentagon_blend):
    ctx, (cps, F) = pentagon_blend
    side, row = 1, 2
    f = F[:, cps.index((side, row, 0))]
    sp = ctx.params[side]
    r = ctx.ribbons[side]
    b = np.array([spline.basis(r.knots_s, r.degree_s, r.shape[0], t)[row] for t in sp.params])
    # interior side vertices carry the basis value; corners average two sides
    np.testing.assert_allclose(f[sp.vertices[1:-1]], b[1:-1], atol=1e-14)
    np.testing.assert_allclose(f[sp.vertices[[0, -1]]], 0.5 * b[[0, -1]], atol=1e-14)


def test_tangent_row_field_goes_negative(pentagon_blend):
    _, (cps, F) = pentagon_blend
    f = F[:, cps.index((1, 0, 1))]
    assert f.min() < -1e-4


def test_blend_index_errors(pentagon_blend):
    ctx, _ = pentagon_blend
    for cp in ((5, 0, 0), (0, 4, 0), (0, 0, 2), (-1, 0, 0)):
        with pytest.raises(IndexError):
            patch.blend_function_field(ctx, cp)
